#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mia/core.hpp"

namespace mia::signals {

/// Cut-off time T'. An empty value means the whole sequence.
class Cutoff {
 public:
  static Cutoff full() { return Cutoff(); }
  static Cutoff at(std::size_t length);
  /// Parses "full" or a positive integer.
  static Cutoff parse(std::string_view text);

  bool is_full() const noexcept { return !length_; }
  /// min(T', n)
  std::size_t apply(std::size_t n) const noexcept;
  /// "full" or the decimal length; used in feature names.
  std::string label() const;

  friend bool operator==(const Cutoff&, const Cutoff&) = default;

 private:
  std::optional<std::size_t> length_;
};

// Signal group names. Every feature belongs to exactly one of these.
inline constexpr std::string_view kCutLoss = "cut_loss";
inline constexpr std::string_view kCalLoss = "cal_loss";
inline constexpr std::string_view kPpl = "ppl";
inline constexpr std::string_view kCalPpl = "cal_ppl";
inline constexpr std::string_view kCountBelow = "cb";
inline constexpr std::string_view kCountBelowMean = "cbm";
inline constexpr std::string_view kCountBelowPrevMean = "cbpm";
inline constexpr std::string_view kSlope = "slope";
inline constexpr std::string_view kApEn = "apen";
inline constexpr std::string_view kLz = "lz";
inline constexpr std::string_view kRepCutLoss = "rep_cut_loss";
inline constexpr std::string_view kRepCalLoss = "rep_cal_loss";
inline constexpr std::string_view kRepPpl = "rep_ppl";
inline constexpr std::string_view kRepCountBelow = "rep_cb";
inline constexpr std::string_view kRepSlope = "rep_slope";

/// All groups in catalog order.
const std::vector<std::string>& all_groups();

struct SignalConfig {
  std::vector<Cutoff> cutoffs{Cutoff::full(), Cutoff::at(200), Cutoff::at(300)};
  std::vector<double> cb_thresholds{1.0, 2.0, 3.0};
  std::vector<std::size_t> slope_lengths{600, 800, 1000};
  std::size_t apen_m = 8;
  double apen_r = 0.8;
  std::vector<std::size_t> apen_lengths{600, 800, 1000};
  std::vector<std::size_t> lz_bins{3, 4, 5};
  std::size_t lz_length = 200;
  std::vector<int> repetition_levels{1, 2};
  std::set<std::string> enabled_groups{all_groups().begin(), all_groups().end()};

  /// Throws ConfigError.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Sequence-level primitives. Losses are the 1-based sequence of the record.

/// |distinct tokens| / |tokens|. Throws EmptyInput.
double token_diversity(std::span<const std::uint64_t> token_ids);
double token_diversity(const SampleRecord& record);

/// Cut-off loss: mean of the first min(T', n) losses.
double sequence_loss(std::span<const double> losses, Cutoff cutoff);
double sequence_loss(const SampleRecord& record, Cutoff cutoff);

double calibrated_loss(const SampleRecord& record, Cutoff cutoff);

/// exp(mean loss) above this is clamped and flagged.
inline constexpr double kMaxPerplexity = 1e300;

struct Perplexity {
  double value = 1.0;
  bool clamped = false;
};

Perplexity perplexity(std::span<const double> losses, Cutoff cutoff, double diversity = 1.0);
Perplexity perplexity(const SampleRecord& record, Cutoff cutoff, bool calibrated);

/// Cyclic tiling / truncation to exactly `length` values.
std::vector<double> tile_losses(std::span<const double> losses, std::size_t length);

/// Least-squares slope of loss against position t = 1..L over the tiled
/// sequence. Negative means decreasing. Throws DegenerateFit for L < 2.
double slope(std::span<const double> losses, std::size_t length);
double slope(const SampleRecord& record, std::size_t length);

double count_below_constant(std::span<const double> losses, Cutoff cutoff, double tau);
/// Threshold is the mean of the full sequence; counting covers the prefix.
double count_below_mean(std::span<const double> losses, Cutoff cutoff);
/// Fraction of t in 2..n with L_t <= mean(L_1..L_{t-1}). Throws DegenerateInput for n < 2.
double count_below_prev_mean(std::span<const double> losses, Cutoff cutoff);

/// Approximate entropy of `series` itself with Chebyshev distance and
/// self-matches counted. Throws WindowError unless series.size() - m >= 1.
double approximate_entropy_of(std::span<const double> series, std::size_t m, double r);
/// Approximate entropy of the losses tiled to `length`.
double approximate_entropy(std::span<const double> losses, std::size_t length, std::size_t m,
                           double r);

/// Equal-width bins over the sequence's own [min, max]; constant input maps to 0.
std::vector<std::uint32_t> quantize(std::span<const double> values, std::size_t bins);
/// Number of phrases in the incremental dictionary parse of `symbols`.
std::size_t lz_phrase_count(std::span<const std::uint32_t> symbols);
std::size_t lz_complexity(std::span<const double> losses, std::size_t length, std::size_t bins);

// ---------------------------------------------------------------------------
// Repetition amplification

/// Signals that may be differenced across repetition contexts.
struct BaseSignal {
  enum class Kind { sequence_loss, calibrated_loss, perplexity, count_below_constant, slope };
  Kind kind = Kind::sequence_loss;
  Cutoff cutoff = Cutoff::full();
  double tau = 1.0;         ///< count_below_constant only
  std::size_t length = 0;   ///< slope only
};

/// signal(losses) - signal(repN_losses). Throws MissingContext when the
/// level's losses are absent.
double repetition_delta(const SampleRecord& record, const BaseSignal& signal, int level);

// ---------------------------------------------------------------------------
// Feature vectors

struct FeatureVector {
  std::map<std::string, double> values;
  /// Group name -> feature names, both in catalog order.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  /// Features that were omitted or flagged, with the reason.
  std::vector<std::string> notes;
};

/// Ordered list of (feature name, group) produced by a config.
struct CatalogEntry {
  std::string name;
  std::string group;
};
std::vector<CatalogEntry> feature_catalog(const SignalConfig& config);

/// Group of a catalog feature name ("rep2_cb_tau1_T200" -> "rep_cb").
/// Names that carry no parameter suffix are their own group.
std::string feature_group(std::string_view name);

/// Evaluates every enabled variation. Features whose preconditions fail are
/// omitted and noted. Throws FeatureError when nothing could be computed.
FeatureVector extract_feature_vector(const SampleRecord& record, const SignalConfig& config);

}  // namespace mia::signals
