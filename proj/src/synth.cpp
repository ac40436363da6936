#include "mia/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "mia/rng.hpp"

namespace mia::synth {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void TraceLaw::validate(const std::string& which) const {
  require(std::isfinite(base_mean) && std::isfinite(slope), which + ": mean and slope must be finite");
  require(noise_std >= 0.0 && std::isfinite(noise_std), which + ": noise_std must be >= 0");
  require(is_probability(spike_prob), which + ": spike_prob must be in [0, 1]");
  require(std::isfinite(spike_magnitude), which + ": spike_magnitude must be finite");
  require(is_probability(reuse_prob), which + ": reuse_prob must be in [0, 1]");
  require(reuse_jitter >= 0.0 && std::isfinite(reuse_jitter), which + ": reuse_jitter must be >= 0");
  require(is_probability(diversity_coupling), which + ": diversity_coupling must be in [0, 1]");
  require(rep_gain > 0.0 && rep_gain <= 1.0, which + ": rep_gain must be in (0, 1]");
}

GeneratorConfig GeneratorConfig::defaults() {
  GeneratorConfig c;
  c.member.base_mean = 2.0;
  c.member.slope = -0.004;
  c.member.noise_std = 0.5;
  c.member.rep_gain = 0.98;
  c.nonmember.base_mean = 3.0;
  c.nonmember.slope = -0.0005;
  c.nonmember.noise_std = 0.9;
  c.nonmember.rep_gain = 0.80;
  return c;
}

GeneratorConfig GeneratorConfig::diversity_confounded() {
  GeneratorConfig c = defaults();
  c.member.reuse_prob = 0.05;
  c.nonmember.reuse_prob = 0.6;
  c.nonmember.reuse_jitter = 0.35;
  c.nonmember.diversity_coupling = 1.0;
  return c;
}

void GeneratorConfig::validate() const {
  require(n_members >= 1, "n_members must be >= 1");
  require(n_nonmembers >= 1, "n_nonmembers must be >= 1");
  require(min_length >= 2, "min_length must be >= 2");
  require(max_length >= min_length, "max_length must be >= min_length");
  require(vocab_size >= 1, "vocab_size must be >= 1");
  require(rep_noise_std >= 0.0 && std::isfinite(rep_noise_std), "rep_noise_std must be >= 0");
  require(std::isfinite(ref_mean), "ref_mean must be finite");
  require(ref_noise_std >= 0.0 && std::isfinite(ref_noise_std), "ref_noise_std must be >= 0");
  member.validate("member");
  nonmember.validate("nonmember");
}

namespace {

std::vector<std::uint64_t> draw_tokens(Rng& rng, std::size_t n, double reuse, std::uint64_t vocab) {
  std::vector<std::uint64_t> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && rng.bernoulli(reuse)) {
      ids.push_back(ids[rng.uniform_index(i)]);
    } else {
      ids.push_back(rng.uniform_index(vocab));
    }
  }
  return ids;
}

double diversity(const std::vector<std::uint64_t>& ids) {
  const std::unordered_set<std::uint64_t> unique(ids.begin(), ids.end());
  return static_cast<double>(unique.size()) / static_cast<double>(ids.size());
}

SampleRecord make_record(const GeneratorConfig& cfg, const TraceLaw& law, Label label,
                         std::size_t index, Rng& rng) {
  SampleRecord r;
  char id[32];
  std::snprintf(id, sizeof id, "rec-%06zu", index);
  r.id = id;
  r.domain = cfg.domain;
  r.label = label;

  const std::size_t span = cfg.max_length - cfg.min_length + 1;
  const std::size_t tokens = cfg.min_length + static_cast<std::size_t>(rng.uniform_index(span));
  const double reuse =
      std::clamp(law.reuse_prob + law.reuse_jitter * (2.0 * rng.uniform01() - 1.0), 0.0, 1.0);
  r.token_ids = draw_tokens(rng, tokens, reuse, cfg.vocab_size);
  const double d = diversity(r.token_ids);
  const double mean = law.base_mean * (1.0 - law.diversity_coupling + law.diversity_coupling * d);

  const std::size_t n = tokens - 1;
  r.losses.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double x = mean + law.slope * static_cast<double>(t + 1) + law.noise_std * rng.normal();
    r.losses[t] = std::max(0.0, x);
  }
  if (rng.bernoulli(law.spike_prob)) {
    auto& v = r.losses[rng.uniform_index(n)];
    v = std::max(0.0, v + law.spike_magnitude);
  }

  if (cfg.with_reps) {
    auto repeat = [&](int level) {
      const double gain = std::pow(law.rep_gain, level);
      std::vector<double> out(n);
      for (std::size_t t = 0; t < n; ++t) {
        out[t] = std::max(0.0, r.losses[t] * gain + cfg.rep_noise_std * rng.normal());
      }
      return out;
    };
    r.rep1_losses = repeat(1);
    r.rep2_losses = repeat(2);
  }
  if (cfg.with_ref) {
    std::vector<double> ref(n);
    for (auto& v : ref) v = std::max(0.0, cfg.ref_mean + cfg.ref_noise_std * rng.normal());
    r.ref_losses = std::move(ref);
  }
  if (cfg.with_vocab_stats) {
    std::vector<double> mu(n);
    std::vector<double> sigma(n);
    for (std::size_t t = 0; t < n; ++t) {
      mu[t] = -10.0 + rng.normal();
      sigma[t] = 2.5 + std::fabs(0.3 * rng.normal());
    }
    r.vocab_mu = std::move(mu);
    r.vocab_sigma = std::move(sigma);
  }
  if (cfg.with_text) {
    std::string text;
    for (std::size_t i = 0; i < r.token_ids.size(); ++i) {
      if (i) text += ' ';
      text += 'w';
      text += std::to_string(r.token_ids[i]);
    }
    r.text = std::move(text);
  }
  return r;
}

}  // namespace

LabeledDataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);

  std::vector<Label> labels(config.n_members, Label::member);
  labels.resize(config.n_members + config.n_nonmembers, Label::nonmember);
  for (std::size_t i = labels.size() - 1; i > 0; --i) {
    std::swap(labels[i], labels[rng.uniform_index(i + 1)]);
  }

  std::vector<SampleRecord> records;
  records.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& law = labels[i] == Label::member ? config.member : config.nonmember;
    records.push_back(make_record(config, law, labels[i], i, rng));
  }
  return LabeledDataset(std::move(records), {{"generator", "synth"}, {"seed", std::to_string(config.seed)}});
}

}  // namespace mia::synth
