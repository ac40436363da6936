#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mia/core.hpp"
#include "mia/feature_matrix.hpp"

namespace mia::composition {

// ---------------------------------------------------------------------------
// Orientation

enum class Orientation { smaller_is_member, larger_is_member };

std::string_view to_string(Orientation o);
std::optional<Orientation> parse_orientation(std::string_view text);

/// Signal group -> which direction points at membership.
class OrientationTable {
 public:
  OrientationTable() = default;
  explicit OrientationTable(std::map<std::string, Orientation> entries)
      : entries_(std::move(entries)) {}

  /// Count-below groups (cb, cbm, cbpm and their rep_ deltas) are
  /// larger_is_member; every other group is smaller_is_member.
  static Orientation default_for(std::string_view group);
  static OrientationTable defaults(const std::vector<std::string>& groups);

  /// Throws ConfigError for an unknown group.
  Orientation at(const std::string& group) const;
  void set(const std::string& group, Orientation o) { entries_[group] = o; }
  const std::map<std::string, Orientation>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, Orientation> entries_;
};

/// Maps a value so that smaller always means member.
double orient(double value, const std::string& group, const OrientationTable& table);

/// Feature names with their signal groups, index-aligned.
struct FeatureSet {
  std::vector<std::string> names;
  std::vector<std::string> groups;

  /// Groups derived with signals::feature_group.
  static FeatureSet from_names(std::vector<std::string> names);
  std::size_t size() const noexcept { return names.size(); }
};

// ---------------------------------------------------------------------------
// Hypothesis-test composition

/// (#{s in pool : s <= v} + 1) / (|pool| + 1). `sorted_pool` ascending.
/// Throws PoolError on an empty pool.
double empirical_p_value(std::span<const double> sorted_pool, double v);

enum class Combiner { edgington, fisher, pearson, george };

std::string_view to_string(Combiner c);
std::optional<Combiner> parse_combiner(std::string_view text);

/// p = 1 is replaced by 1 - kPEpsilon in Pearson and George.
inline constexpr double kPEpsilon = 1e-12;

/// edgington: sum p; fisher: sum log p; pearson: -sum log(1 - p);
/// george: sum log(p / (1 - p)). Smaller means member for all four.
double combine_p_values(std::span<const double> ps, Combiner combiner);

/// Per-feature non-member reference pools plus a combiner.
class PValueComposer {
 public:
  PValueComposer() = default;
  /// Pools hold oriented values, sorted ascending; one per feature.
  PValueComposer(FeatureSet features, std::vector<Orientation> orientation,
                 std::vector<std::vector<double>> pools, Combiner combiner);

  /// Builds one pool per feature from the non-missing values of
  /// `reference_rows` (non-members). Throws PoolError if any pool is empty.
  static PValueComposer fit(std::span<const FeatureRow> reference_rows, const FeatureSet& features,
                            const OrientationTable& table, Combiner combiner);

  bool fitted() const noexcept { return !pools_.empty(); }
  const FeatureSet& features() const noexcept { return features_; }
  const std::vector<Orientation>& orientation() const noexcept { return orientation_; }
  const std::vector<std::vector<double>>& pools() const noexcept { return pools_; }
  /// Oriented pool median, used for missing features.
  const std::vector<double>& imputation() const noexcept { return impute_; }
  Combiner combiner() const noexcept { return combiner_; }

  /// Per-feature p-values of one row aligned with features().
  std::vector<double> p_values(std::span<const std::optional<double>> row) const;

 private:
  FeatureSet features_;
  std::vector<Orientation> orientation_;
  std::vector<std::vector<double>> pools_;
  std::vector<double> impute_;
  Combiner combiner_ = Combiner::edgington;
};

// ---------------------------------------------------------------------------
// Group PCA

struct PcaGroup {
  std::string name;
  std::vector<std::size_t> columns;  ///< indices into the input features
  std::vector<double> mean;
  std::vector<double> scale;         ///< sample std; 1 where the std is zero
  std::vector<double> eigenvalues;   ///< all of them, descending
  Eigen::MatrixXd directions;        ///< columns.size() x c, orthonormal columns
};

struct GroupPCA {
  std::vector<PcaGroup> groups;

  std::size_t output_dim() const;
  /// Rows are records; output columns are ordered group by group.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  /// "<group>_pc<k>" names and their groups.
  FeatureSet outputs() const;
};

/// Fraction of total eigenvalue mass captured by the top `c` components.
double captured_variance(const PcaGroup& group, std::size_t c);

/// Per group: standardize with the rows' mean / sample std, take the top-c
/// eigenvectors of the (n-1)-normalized covariance, descending eigenvalue,
/// signs fixed so each direction's first nonzero entry is positive.
/// Throws ConfigError when c exceeds a group's size or c == 0.
GroupPCA fit_group_pca(const Eigen::MatrixXd& x, const FeatureSet& features, std::size_t c);

// ---------------------------------------------------------------------------
// Logistic regression

struct LROptions {
  double learning_rate = 0.1;
  std::size_t epochs = 1000;
  /// Objective adds ridge / 2 * |w|^2 (bias excluded). 0 disables.
  double ridge = 1e-4;
  /// Components per group when group PCA is used.
  std::optional<std::size_t> pca_components;
};

/// mean cross-entropy of sigmoid(x w + b) against y in {0, 1}, plus ridge.
double lr_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    double b, double ridge);
void lr_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 double b, double ridge, Eigen::VectorXd& grad_w, double& grad_b);

struct LogisticFit {
  Eigen::VectorXd weights;
  double bias = 0.0;
  /// Objective before each epoch and after the last one (epochs + 1 values).
  std::vector<double> loss_history;
};

/// Full-batch gradient descent from zero weights and bias.
/// Throws NumericalError on a non-finite gradient.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LROptions& options);

double sigmoid(double z);

struct LRModel {
  FeatureSet features;               ///< raw inputs expected by score()
  std::vector<double> impute;        ///< median of each raw input on the attack set
  std::optional<GroupPCA> gpca;
  std::vector<std::size_t> kept;     ///< transformed dimensions fed to the regression
  FeatureSet inputs;                 ///< names / groups of the kept dimensions
  std::vector<double> mean;          ///< standardization of kept dimensions
  std::vector<double> scale;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<std::string> dropped;  ///< zero-variance dimensions
  std::vector<double> training_loss;
  LROptions options;
  bool fitted = false;
};

/// Imputes missing values with attack-set medians, optionally applies group
/// PCA, standardizes (dropping zero-variance dimensions) and fits the
/// logistic model. Labels must be member / nonmember; both are required.
LRModel fit_lr(std::span<const FeatureRow> rows, std::span<const Label> labels,
               const FeatureSet& features, const LROptions& options);

/// Transformed, standardized input vector of one row.
Eigen::VectorXd lr_inputs(const LRModel& model, std::span<const std::optional<double>> row);

// ---------------------------------------------------------------------------
// Scoring. Higher always means member.

using AttackModel = std::variant<PValueComposer, LRModel>;

double score(const PValueComposer& model, std::span<const std::optional<double>> row);
double score(const LRModel& model, std::span<const std::optional<double>> row);
double score(const AttackModel& model, std::span<const std::optional<double>> row);

const FeatureSet& model_features(const AttackModel& model);

/// Median of the non-missing entries; nullopt when there are none.
std::optional<double> median(std::vector<double> values);

}  // namespace mia::composition
