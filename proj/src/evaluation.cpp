#include "mia/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace mia::evaluation {

ScoredDataset::ScoredDataset(std::vector<ScoredRecord> records) : records_(std::move(records)) {
  for (const auto& r : records_) {
    if (r.label == Label::unknown) throw MetricError("scored record '" + r.id + "' has no label");
    if (!std::isfinite(r.score)) throw MetricError("scored record '" + r.id + "' has a non-finite score");
    members_ += r.label == Label::member;
  }
}

namespace {

void require_both_classes(const ScoredDataset& s) {
  if (s.members() == 0 || s.nonmembers() == 0) {
    throw MetricError("metric needs both members and non-members");
  }
}

std::vector<std::size_t> order_descending(const ScoredDataset& s) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.records()[a].score > s.records()[b].score;
  });
  return idx;
}

}  // namespace

std::vector<RocPoint> roc_curve(const ScoredDataset& scored) {
  require_both_classes(scored);
  const auto& recs = scored.records();
  const auto idx = order_descending(scored);
  const double pos = static_cast<double>(scored.members());
  const double neg = static_cast<double>(scored.nonmembers());

  std::vector<RocPoint> roc{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double threshold = recs[idx[i]].score;
    while (i < idx.size() && recs[idx[i]].score == threshold) {
      (recs[idx[i]].label == Label::member ? tp : fp)++;
      ++i;
    }
    roc.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, threshold});
  }
  return roc;
}

double auc(const ScoredDataset& scored) {
  require_both_classes(scored);
  const auto& recs = scored.records();
  std::vector<std::size_t> idx(recs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return recs[a].score < recs[b].score; });

  // Mid-ranks, 1-based; a tie block spanning ranks i+1..j gets (i+1+j)/2.
  double member_rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t members_in_block = 0;
    while (j < idx.size() && recs[idx[j]].score == recs[idx[i]].score) {
      members_in_block += recs[idx[j]].label == Label::member;
      ++j;
    }
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    member_rank_sum += mid_rank * static_cast<double>(members_in_block);
    i = j;
  }
  const double pos = static_cast<double>(scored.members());
  const double neg = static_cast<double>(scored.nonmembers());
  return (member_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

namespace {

const RocPoint& best_point(const std::vector<RocPoint>& roc, double fpr_target) {
  if (!(fpr_target >= 0.0 && fpr_target < 1.0)) {
    throw MetricError("FPR target must be in [0, 1)");
  }
  const RocPoint* best = &roc.front();
  for (const auto& p : roc) {
    if (p.fpr <= fpr_target && p.tpr > best->tpr) best = &p;
  }
  return *best;
}

}  // namespace

double tpr_at_fpr(const ScoredDataset& scored, double fpr_target) {
  const auto roc = roc_curve(scored);
  return best_point(roc, fpr_target).tpr;
}

std::vector<std::string> detected_members(const ScoredDataset& scored, double fpr_target) {
  const auto roc = roc_curve(scored);
  const double threshold = best_point(roc, fpr_target).threshold;
  std::vector<std::string> out;
  for (const auto& r : scored.records()) {
    if (r.label == Label::member && r.score >= threshold) out.push_back(r.id);
  }
  return out;
}

Overlap overlap_analysis(const ScoredDataset& scored_f, const ScoredDataset& scored_loss,
                         double fpr_target) {
  std::set<std::string> ids_f;
  std::set<std::string> ids_loss;
  for (const auto& r : scored_f.records()) ids_f.insert(r.id);
  for (const auto& r : scored_loss.records()) ids_loss.insert(r.id);
  if (ids_f != ids_loss) throw MetricError("overlap analysis needs scores over the same records");

  const auto found_f = detected_members(scored_f, fpr_target);
  const auto found_loss = detected_members(scored_loss, fpr_target);
  const std::set<std::string> set_f(found_f.begin(), found_f.end());
  const std::set<std::string> set_loss(found_loss.begin(), found_loss.end());
  std::size_t common = 0;
  for (const auto& id : set_f) common += set_loss.count(id);

  Overlap o;
  if (!set_f.empty()) o.new_fraction = 1.0 - static_cast<double>(common) / static_cast<double>(set_f.size());
  if (!set_loss.empty()) {
    o.missing_fraction = 1.0 - static_cast<double>(common) / static_cast<double>(set_loss.size());
  }
  return o;
}

Histogram histogram(std::span<const double> values, std::span<const Label> labels, std::size_t bins) {
  if (values.empty()) throw MetricError("histogram of no values");
  if (values.size() != labels.size()) throw MetricError("histogram values and labels differ in length");
  if (bins == 0) throw MetricError("histogram needs at least one bin");

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(bins);

  Histogram h;
  h.members.assign(bins, 0);
  h.nonmembers.assign(bins, 0);
  for (std::size_t k = 0; k <= bins; ++k) {
    h.edges.push_back(k == bins ? hi : lo + width * static_cast<double>(k));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t b = 0;
    if (width > 0.0) {
      const double pos = std::floor((values[i] - lo) / width);
      b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    }
    switch (labels[i]) {
      case Label::member: ++h.members[b]; break;
      case Label::nonmember: ++h.nonmembers[b]; break;
      case Label::unknown: throw MetricError("histogram values must be labelled");
    }
  }
  return h;
}

std::map<std::string, double> feature_importance(const composition::LRModel& model) {
  if (!model.fitted) throw StateError("feature importance of an unfitted model");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    auto& [sum, count] = acc[model.inputs.groups[k]];
    sum += std::fabs(model.weights[k]);
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [group, sc] : acc) out[group] = sc.first / static_cast<double>(sc.second);
  return out;
}

AttackEvaluation evaluate_attack(std::string name, const ScoredDataset& scored,
                                 const std::vector<double>& fpr_targets,
                                 const ScoredDataset* loss_baseline, std::size_t histogram_bins) {
  AttackEvaluation ev;
  ev.name = std::move(name);
  ev.members = scored.members();
  ev.nonmembers = scored.nonmembers();
  ev.auc = auc(scored);
  ev.roc = roc_curve(scored);
  for (double t : fpr_targets) ev.tpr_at.emplace_back(t, best_point(ev.roc, t).tpr);
  if (loss_baseline) ev.overlap_vs_loss = overlap_analysis(scored, *loss_baseline, 0.01);

  std::vector<double> values;
  std::vector<Label> labels;
  for (const auto& r : scored.records()) {
    values.push_back(r.score);
    labels.push_back(r.label);
  }
  ev.histogram = histogram(values, labels, histogram_bins);
  return ev;
}

}  // namespace mia::evaluation
