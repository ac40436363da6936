#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mia/evaluation.hpp"
#include "oracles.hpp"

using namespace mia;
using namespace mia::evaluation;
using doctest::Approx;

namespace {

ScoredDataset make(const std::vector<double>& members, const std::vector<double>& nonmembers) {
  std::vector<ScoredRecord> r;
  for (std::size_t i = 0; i < members.size(); ++i) r.push_back({"m" + std::to_string(i), Label::member, members[i]});
  for (std::size_t i = 0; i < nonmembers.size(); ++i) {
    r.push_back({"n" + std::to_string(i), Label::nonmember, nonmembers[i]});
  }
  return ScoredDataset(std::move(r));
}

std::vector<double> ties(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng.uniform_index(15)) / 3.0;
  return v;
}

double trapezoid(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace

TEST_CASE("scored dataset validation") {
  CHECK_THROWS_AS(ScoredDataset({{"a", Label::unknown, 1.0}}), MetricError);
  CHECK_THROWS_AS(ScoredDataset({{"a", Label::member, std::nan("")}}), MetricError);
  CHECK_THROWS_AS(auc(make({1.0}, {})), MetricError);
  CHECK_THROWS_AS(roc_curve(make({}, {1.0})), MetricError);
}

TEST_CASE("perfect separation") {
  const auto s = make({0.9, 0.8}, {0.1, 0.2});
  CHECK(auc(s) == 1.0);
  const auto roc = roc_curve(s);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(std::isinf(roc.front().threshold));
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  CHECK(std::any_of(roc.begin(), roc.end(), [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; }));
  CHECK(tpr_at_fpr(s, 0.01) == 1.0);
  CHECK(tpr_at_fpr(make({0.1, 0.2}, {0.9, 0.8}), 0.01) == 0.0);
  CHECK_THROWS_AS(tpr_at_fpr(s, 1.0), MetricError);
  CHECK_THROWS_AS(tpr_at_fpr(s, -0.1), MetricError);
}

TEST_CASE("all scores equal") {
  const auto s = make({1, 1, 1}, {1, 1});
  const auto roc = roc_curve(s);
  REQUIRE(roc.size() == 2);
  CHECK(roc[1].fpr == 1.0);
  CHECK(roc[1].tpr == 1.0);
  CHECK(auc(s) == 0.5);
}

TEST_CASE("AUC, ROC and TPR agree with brute force") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto m = ties(rng, 1 + rng.uniform_index(100));
    const auto n = ties(rng, 1 + rng.uniform_index(100));
    const auto s = make(m, n);
    CHECK(std::fabs(auc(s) - oracle::auc(m, n)) <= 1e-12);
    CHECK(std::fabs(auc(s) - trapezoid(roc_curve(s))) <= 1e-12);

    // Each ROC point is the confusion matrix at its threshold.
    const auto brute = oracle::roc_points(m, n);
    const auto roc = roc_curve(s);
    REQUIRE(roc.size() == brute.size());
    for (std::size_t k = 0; k < roc.size(); ++k) {
      CHECK(roc[k].fpr == brute[k].first);
      CHECK(roc[k].tpr == brute[k].second);
      if (k) CHECK(roc[k].fpr >= roc[k - 1].fpr);
      if (k) CHECK(roc[k].tpr >= roc[k - 1].tpr);
    }

    double prev = 0.0;
    for (double t : {0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.99}) {
      const double got = tpr_at_fpr(s, t);
      CHECK(got == oracle::tpr_at_fpr(m, n, t));
      CHECK(got >= prev);
      prev = got;
    }

    // Negating scores mirrors the AUC.
    std::vector<double> nm(m), nn(n);
    std::transform(m.begin(), m.end(), nm.begin(), [](double v) { return -v; });
    std::transform(n.begin(), n.end(), nn.begin(), [](double v) { return -v; });
    CHECK(auc(make(nm, nn)) == Approx(1.0 - auc(s)).epsilon(1e-12));

    // Strictly increasing transforms leave the (fpr, tpr) set unchanged.
    std::vector<double> em(m), en(n);
    std::transform(m.begin(), m.end(), em.begin(), [](double v) { return std::exp(v) * 3 + 1; });
    std::transform(n.begin(), n.end(), en.begin(), [](double v) { return std::exp(v) * 3 + 1; });
    const auto roc2 = roc_curve(make(em, en));
    REQUIRE(roc2.size() == roc.size());
    for (std::size_t k = 0; k < roc.size(); ++k) {
      CHECK(roc2[k].fpr == roc[k].fpr);
      CHECK(roc2[k].tpr == roc[k].tpr);
    }
  }
}

TEST_CASE("AUC is near one half for scores independent of labels") {
  Rng rng(2);
  std::vector<double> m(500), n(500);
  for (auto& v : m) v = rng.normal();
  for (auto& v : n) v = rng.normal();
  CHECK(std::fabs(auc(make(m, n)) - 0.5) < 0.05);
}

TEST_CASE("overlap analysis") {
  // Both attacks find the same members.
  const auto a = make({0.9, 0.8, 0.1}, {0.2, 0.3, 0.4});
  CHECK(overlap_analysis(a, a).new_fraction == 0.0);
  CHECK(overlap_analysis(a, a).missing_fraction == 0.0);

  // Disjoint detections.
  const auto f = make({0.9, 0.1}, {0.5, 0.5});
  std::vector<ScoredRecord> loss_recs{{"m0", Label::member, 0.1}, {"m1", Label::member, 0.9},
                                      {"n0", Label::nonmember, 0.5}, {"n1", Label::nonmember, 0.5}};
  const ScoredDataset loss(loss_recs);
  const auto o = overlap_analysis(f, loss);
  CHECK(o.new_fraction == 1.0);
  CHECK(o.missing_fraction == 1.0);

  // Nothing detected by either side.
  const auto none = make({0.1}, {0.9});
  CHECK(overlap_analysis(none, none).new_fraction == 0.0);

  CHECK_THROWS_AS(overlap_analysis(a, f), MetricError);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> m1(60), m2(60), n1(100), n2(100);
    for (auto& v : m1) v = rng.normal() + 1.0;
    for (auto& v : m2) v = rng.normal() + 1.0;
    for (auto& v : n1) v = rng.normal();
    for (auto& v : n2) v = rng.normal();
    const auto s1 = make(m1, n1);
    const auto s2 = make(m2, n2);
    const auto c1 = detected_members(s1, 0.01);
    const auto c2 = detected_members(s2, 0.01);
    std::set<std::string> a1(c1.begin(), c1.end()), a2(c2.begin(), c2.end()), both;
    std::set_intersection(a1.begin(), a1.end(), a2.begin(), a2.end(), std::inserter(both, both.end()));
    const auto ov = overlap_analysis(s1, s2);
    CHECK(ov.new_fraction == Approx(a1.empty() ? 0.0 : 1.0 - double(both.size()) / a1.size()));
    CHECK(ov.missing_fraction == Approx(a2.empty() ? 0.0 : 1.0 - double(both.size()) / a2.size()));
    CHECK(double(c1.size()) / 60.0 == tpr_at_fpr(s1, 0.01));
  }
}

TEST_CASE("histograms") {
  const std::vector<double> v{0.0, 1.0};
  const std::vector<Label> l{Label::member, Label::nonmember};
  const auto h = histogram(v, l, 2);
  CHECK(h.members == std::vector<std::size_t>{1, 0});
  CHECK(h.nonmembers == std::vector<std::size_t>{0, 1});
  CHECK(h.edges == std::vector<double>{0.0, 0.5, 1.0});

  const std::vector<double> c{3.0, 3.0, 3.0};
  const std::vector<Label> lc{Label::member, Label::member, Label::nonmember};
  const auto hc = histogram(c, lc, 4);
  CHECK(hc.members[0] == 2);
  CHECK(hc.nonmembers[0] == 1);

  CHECK_THROWS_AS(histogram(std::vector<double>{}, std::vector<Label>{}), MetricError);

  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.uniform_index(200);
    std::vector<double> vals(n);
    std::vector<Label> labs(n);
    std::size_t members = 0;
    for (std::size_t k = 0; k < n; ++k) {
      vals[k] = rng.normal();
      labs[k] = rng.bernoulli(0.4) ? Label::member : Label::nonmember;
      members += labs[k] == Label::member;
    }
    const auto hr = histogram(vals, labs, 1 + rng.uniform_index(40));
    std::size_t sm = 0, sn = 0;
    for (auto x : hr.members) sm += x;
    for (auto x : hr.nonmembers) sn += x;
    CHECK(sm == members);
    CHECK(sn == n - members);
  }
}

TEST_CASE("feature importance") {
  composition::LRModel m;
  CHECK_THROWS_AS(feature_importance(m), StateError);
  m.fitted = true;
  m.inputs = composition::FeatureSet::from_names({"cut_loss_T200"});
  m.weights = {-2.0};
  CHECK(feature_importance(m).at("cut_loss") == 2.0);
  m.inputs = composition::FeatureSet::from_names({"cut_loss_T200", "cut_loss_T300", "slope_L600"});
  m.weights = {0.0, 0.0, 0.0};
  for (const auto& [g, v] : feature_importance(m)) CHECK(v == 0.0);
  m.weights = {1.0, -3.0, 0.5};
  const auto imp = feature_importance(m);
  CHECK(imp.at("cut_loss") == 2.0);
  CHECK(imp.at("slope") == 0.5);
}

TEST_CASE("evaluate_attack bundles the metrics") {
  Rng rng(5);
  std::vector<double> m(50), n(50);
  for (auto& v : m) v = rng.normal() + 1;
  for (auto& v : n) v = rng.normal();
  const auto s = make(m, n);
  const auto ev = evaluate_attack("x", s, {0.001, 0.01, 0.05}, &s, 10);
  CHECK(ev.auc == auc(s));
  CHECK(ev.tpr_at.size() == 3);
  CHECK(ev.tpr_at[1].second == tpr_at_fpr(s, 0.01));
  REQUIRE(ev.overlap_vs_loss);
  CHECK(ev.overlap_vs_loss->new_fraction == 0.0);
  CHECK(ev.histogram.members.size() == 10);
  CHECK(ev.members == 50);
}
