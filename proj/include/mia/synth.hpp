#pragma once

#include <cstdint>
#include <string>

#include "mia/core.hpp"

namespace mia::synth {

/// Per-class law for generated loss traces.
struct TraceLaw {
  double base_mean = 2.0;
  double slope = 0.0;  ///< per token position
  double noise_std = 0.5;
  double spike_prob = 0.1;
  double spike_magnitude = 8.0;
  /// Chance that a token repeats an earlier token of the same text.
  double reuse_prob = 0.25;
  /// Per-record reuse probability is drawn uniformly from reuse_prob +- jitter.
  double reuse_jitter = 0.0;
  /// Mixes token diversity d into the mean: base_mean * (1 - k + k * d).
  double diversity_coupling = 0.0;
  /// rep_k losses = losses * rep_gain^k + noise.
  double rep_gain = 1.0;

  void validate(const std::string& which) const;
};

struct GeneratorConfig {
  std::size_t n_members = 500;
  std::size_t n_nonmembers = 500;
  std::size_t min_length = 100;  ///< tokens
  std::size_t max_length = 400;
  TraceLaw member;
  TraceLaw nonmember;
  double rep_noise_std = 0.1;
  double ref_mean = 3.0;
  double ref_noise_std = 0.9;
  std::uint64_t vocab_size = 50000;
  bool with_text = true;
  bool with_reps = true;
  bool with_ref = true;
  bool with_vocab_stats = true;
  std::string domain = "synthetic";
  std::uint64_t seed = 7;

  /// 500 + 500 records; members lower, flatter-starting and repetition-stable.
  static GeneratorConfig defaults();
  /// Non-members that reuse many tokens get low raw loss, so raw loss is
  /// confounded by diversity while loss / diversity is not.
  static GeneratorConfig diversity_confounded();

  /// Throws ConfigError.
  void validate() const;
};

/// Records are shuffled across classes and named rec-000000, rec-000001, ...
/// Deterministic given the config.
LabeledDataset generate_dataset(const GeneratorConfig& config);

}  // namespace mia::synth
