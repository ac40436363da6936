#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mia/core.hpp"

namespace mia::baselines {

enum class Method { loss, zlib, min_k, min_k_pp, reference, blind_nb };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view text);

/// Orientation: smaller means member, except blind_nb (member probability).
struct BaselineScore {
  std::string id;
  Method method = Method::loss;
  double score = 0.0;
};

/// zlib level used for the Zlib baseline (Z_DEFAULT_COMPRESSION resolves to 6).
inline constexpr int kDeflateLevel = 6;

/// Byte length of `text` compressed as a raw DEFLATE stream (RFC 1951, no
/// zlib header or checksum) at kDeflateLevel, window 2^15, memLevel 8.
std::size_t deflate_length(std::string_view text);

/// Mean loss over the full sequence.
double loss_score(const SampleRecord& record);
/// Mean loss / deflate_length(text). Throws MissingText.
double zlib_score(const SampleRecord& record);
/// Mean of the ceil(K% * n) largest losses.
double min_k_score(const SampleRecord& record, double k_percent = 20.0);
/// Losses normalized by (loss - mu) / sigma, then mean of the ceil(K% * n')
/// largest normalized values, n' counting only tokens with sigma > 0.
double min_k_pp_score(const SampleRecord& record, double k_percent = 20.0);
/// mean(losses) - mean(ref_losses). Throws MissingContext.
double reference_score(const SampleRecord& record);

/// Lowercase, whitespace-separated words.
std::vector<std::string> bag_of_words(std::string_view text);

/// Multinomial Naive Bayes over bag-of-words with add-one smoothing, trained
/// on `train` and scoring every record of `eval` with P(member | text).
/// Words not seen in training are ignored.
std::vector<BaselineScore> blind_baseline(const LabeledDataset& train, const LabeledDataset& eval);

}  // namespace mia::baselines
