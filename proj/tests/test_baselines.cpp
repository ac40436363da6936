#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "mia/baselines.hpp"
#include "mia/evaluation.hpp"
#include "mia/signals.hpp"
#include "mia/synth.hpp"

using namespace mia;
using namespace mia::baselines;
using doctest::Approx;

TEST_CASE("method names") {
  for (auto m : {Method::loss, Method::zlib, Method::min_k, Method::min_k_pp, Method::reference, Method::blind_nb}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_FALSE(parse_method("neighbor"));
}

TEST_CASE("raw DEFLATE lengths match the reference compressor") {
  // Lengths from an independent zlib binding: level 6, wbits -15, memLevel 8.
  std::string noise;
  for (int i = 0; i < 1000; ++i) noise += static_cast<char>(33 + (i * 7919) % 90);
  std::string fox;
  for (int i = 0; i < 20; ++i) fox += "the quick brown fox jumps over the lazy dog ";
  CHECK(deflate_length("") == 2);
  CHECK(deflate_length("a") == 3);
  CHECK(deflate_length("hello world") == 13);
  CHECK(deflate_length(fox) == 54);
  CHECK(deflate_length("Membership inference attack") == 29);
  CHECK(deflate_length(noise) == 102);
}

TEST_CASE("loss baseline equals the full cut-off loss") {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto r = testing::make_record("r", testing::random_losses(rng, 1 + rng.uniform_index(300)));
    CHECK(std::fabs(loss_score(r) - signals::sequence_loss(r, signals::Cutoff::full())) <= 1e-15);
  }
}

TEST_CASE("zlib score") {
  auto r = testing::make_record("r", {2.0, 4.0});
  CHECK_THROWS_AS(zlib_score(r), MissingText);
  r.text = "hello world";
  CHECK(zlib_score(r) == Approx(3.0 / 13.0).epsilon(1e-15));
}

TEST_CASE("min-k") {
  const auto r = testing::make_record("r", {1, 2, 3, 4, 5});
  CHECK(min_k_score(r, 40) == 4.5);
  CHECK(min_k_score(r, 100) == 3.0);
  CHECK(min_k_score(r, 1) == 5.0);
  CHECK_THROWS_AS(min_k_score(r, 0), ConfigError);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto q = testing::make_record("q", testing::random_losses(rng, 1 + rng.uniform_index(100)));
    double prev = std::numeric_limits<double>::infinity();
    for (double k = 5; k <= 100; k += 5) {
      const double s = min_k_score(q, k);
      CHECK(s <= prev + 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("min-k++") {
  auto r = testing::make_record("r", {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(min_k_pp_score(r, 20), MissingContext);
  r.vocab_mu = r.losses;
  r.vocab_sigma = std::vector<double>{1.0, 2.0, 3.0};
  CHECK(min_k_pp_score(r, 20) == 0.0);

  r.vocab_mu = std::vector<double>{0.0, 0.0, 0.0};
  r.vocab_sigma = std::vector<double>{1.0, 0.0, 1.0};
  CHECK(min_k_pp_score(r, 50) == 3.0);
  CHECK(min_k_pp_score(r, 100) == 2.0);
  r.vocab_sigma = std::vector<double>{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(min_k_pp_score(r, 20), DegenerateInput);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.uniform_index(80);
    auto q = testing::make_record("q", testing::random_losses(rng, n));
    std::vector<double> mu(n), sigma(n);
    for (std::size_t t = 0; t < n; ++t) {
      mu[t] = -10.0 + rng.normal();
      sigma[t] = 0.5 + rng.uniform01();
    }
    q.vocab_mu = mu;
    q.vocab_sigma = sigma;
    std::vector<double> z(n);
    for (std::size_t t = 0; t < n; ++t) z[t] = (q.losses[t] - mu[t]) / sigma[t];
    std::sort(z.rbegin(), z.rend());
    const auto k = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n)));
    const double want = std::accumulate(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
                        static_cast<double>(k);
    CHECK(min_k_pp_score(q, 20) == Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("reference score") {
  auto r = testing::make_record("r", {2.0, 2.0});
  CHECK_THROWS_AS(reference_score(r), MissingContext);
  r.ref_losses = r.losses;
  CHECK(reference_score(r) == 0.0);
  r.ref_losses = std::vector<double>{3.0, 3.0};
  CHECK(reference_score(r) == -1.0);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    auto q = testing::make_record("q", testing::random_losses(rng, 1 + rng.uniform_index(50)));
    q.ref_losses = testing::random_losses(rng, q.losses.size());
    auto swapped = q;
    std::swap(swapped.losses, *swapped.ref_losses);
    CHECK(reference_score(swapped) == Approx(-reference_score(q)).epsilon(1e-12));
    const double want = signals::sequence_loss(q.losses, signals::Cutoff::full()) -
                        signals::sequence_loss(*q.ref_losses, signals::Cutoff::full());
    CHECK(std::fabs(reference_score(q) - want) <= 1e-12);
  }
}

TEST_CASE("bag of words") {
  CHECK(bag_of_words("  The cat\tTHE\n dog ") == std::vector<std::string>{"the", "cat", "the", "dog"});
  CHECK(bag_of_words("").empty());
}

namespace {

SampleRecord text_record(std::string id, std::string text, Label label) {
  auto r = testing::make_record(std::move(id), {1.0}, label);
  r.text = std::move(text);
  return r;
}

}  // namespace

TEST_CASE("blind baseline") {
  const LabeledDataset train({text_record("m1", "alpha beta gamma", Label::member),
                              text_record("m2", "alpha alpha delta", Label::member),
                              text_record("n1", "omega psi chi", Label::nonmember),
                              text_record("n2", "omega phi phi", Label::nonmember)});
  const LabeledDataset eval({text_record("e1", "alpha beta gamma", Label::unknown),
                             text_record("e2", "omega psi chi", Label::unknown),
                             text_record("e3", "never seen words", Label::unknown)});
  const auto s = blind_baseline(train, eval);
  REQUIRE(s.size() == 3);
  CHECK(s[0].id == "e1");
  CHECK(s[0].method == Method::blind_nb);
  CHECK(s[0].score > 0.5);
  CHECK(s[1].score < 0.5);
  CHECK(s[2].score == Approx(0.5));

  const LabeledDataset single({text_record("m1", "a b", Label::member)});
  CHECK_THROWS_AS(blind_baseline(single, eval), TrainError);
  const LabeledDataset no_text({testing::make_record("x", {1.0})});
  CHECK_THROWS_AS(blind_baseline(train, no_text), MissingText);
}

TEST_CASE("blind baseline is at chance when labels ignore the text") {
  Rng rng(77);
  std::vector<SampleRecord> train, eval;
  for (int i = 0; i < 1000; ++i) {
    const auto label = rng.bernoulli(0.5) ? Label::member : Label::nonmember;
    auto r = text_record("r" + std::to_string(i), "same words every time", label);
    (i < 300 ? train : eval).push_back(r);
  }
  const auto s = blind_baseline(LabeledDataset(train), LabeledDataset(eval));
  std::vector<evaluation::ScoredRecord> scored;
  for (std::size_t i = 0; i < s.size(); ++i) scored.push_back({s[i].id, eval[i].label, s[i].score});
  CHECK(evaluation::auc(evaluation::ScoredDataset(scored)) == Approx(0.5).epsilon(0.05));

  auto cfg = synth::GeneratorConfig::defaults();
  const auto ds = synth::generate_dataset(cfg);
  const auto [attack, target] = split_dataset(ds, {30.0, 1, SplitMode::member_and_nonmember});
  const auto nb = blind_baseline(attack, target);
  scored.clear();
  for (std::size_t i = 0; i < nb.size(); ++i) scored.push_back({nb[i].id, target[i].label, nb[i].score});
  CHECK(std::fabs(evaluation::auc(evaluation::ScoredDataset(scored)) - 0.5) < 0.05);
}
