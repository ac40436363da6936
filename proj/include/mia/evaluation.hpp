#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mia/composition.hpp"
#include "mia/core.hpp"

namespace mia::evaluation {

struct ScoredRecord {
  std::string id;
  Label label = Label::nonmember;  ///< member or nonmember
  double score = 0.0;              ///< higher means member
};

/// Scores with ground truth. Construction checks labels and finiteness.
class ScoredDataset {
 public:
  ScoredDataset() = default;
  /// Throws MetricError for unknown labels or non-finite scores.
  explicit ScoredDataset(std::vector<ScoredRecord> records);

  const std::vector<ScoredRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t members() const noexcept { return members_; }
  std::size_t nonmembers() const noexcept { return records_.size() - members_; }

 private:
  std::vector<ScoredRecord> records_;
  std::size_t members_ = 0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Predict member iff score >= threshold; +inf for the (0, 0) point.
  double threshold = 0.0;
};

/// Thresholds sweep the distinct scores in descending order; equal scores
/// move together. Starts at (0, 0) and ends at (1, 1).
std::vector<RocPoint> roc_curve(const ScoredDataset& scored);

/// Mann-Whitney AUC via mid-rank sums: P(member > nonmember) + P(tie) / 2.
double auc(const ScoredDataset& scored);

/// Largest TPR among ROC points with FPR <= target (no interpolation).
double tpr_at_fpr(const ScoredDataset& scored, double fpr_target);

/// Members correctly flagged at the ROC point chosen by tpr_at_fpr.
std::vector<std::string> detected_members(const ScoredDataset& scored, double fpr_target);

struct Overlap {
  double new_fraction = 0.0;      ///< 1 - |C_f & C_loss| / |C_f|
  double missing_fraction = 0.0;  ///< 1 - |C_f & C_loss| / |C_loss|
};

/// Throws MetricError unless both datasets cover the same ids.
Overlap overlap_analysis(const ScoredDataset& scored_f, const ScoredDataset& scored_loss,
                         double fpr_target = 0.01);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 values over [min, max]
  std::vector<std::size_t> members;
  std::vector<std::size_t> nonmembers;
};

/// Equal-width bins over the global [min, max]; the last bin is closed.
/// Constant input puts everything in the first bin.
Histogram histogram(std::span<const double> values, std::span<const Label> labels,
                    std::size_t bins = 30);

/// Signal group -> mean |weight| of the model inputs in that group.
std::map<std::string, double> feature_importance(const composition::LRModel& model);

struct AttackEvaluation {
  std::string name;
  std::size_t members = 0;
  std::size_t nonmembers = 0;
  double auc = 0.0;
  std::vector<std::pair<double, double>> tpr_at;  ///< (fpr target, tpr)
  std::vector<RocPoint> roc;
  std::optional<Overlap> overlap_vs_loss;
  Histogram histogram;
  std::map<std::string, double> importances;
};

struct EvaluationReport {
  std::vector<double> fpr_targets;
  std::vector<AttackEvaluation> attacks;
};

/// Everything except importances, which need the model.
AttackEvaluation evaluate_attack(std::string name, const ScoredDataset& scored,
                                 const std::vector<double>& fpr_targets,
                                 const ScoredDataset* loss_baseline, std::size_t histogram_bins = 30);

}  // namespace mia::evaluation
