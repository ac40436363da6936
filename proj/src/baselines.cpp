#include "mia/baselines.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

#include <zlib.h>

#include "mia/signals.hpp"

namespace mia::baselines {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::loss: return "loss";
    case Method::zlib: return "zlib";
    case Method::min_k: return "min_k";
    case Method::min_k_pp: return "min_k_pp";
    case Method::reference: return "reference";
    case Method::blind_nb: return "blind_nb";
  }
  return "loss";
}

std::optional<Method> parse_method(std::string_view text) {
  for (auto m : {Method::loss, Method::zlib, Method::min_k, Method::min_k_pp, Method::reference,
                 Method::blind_nb}) {
    if (text == to_string(m)) return m;
  }
  return std::nullopt;
}

std::size_t deflate_length(std::string_view text) {
  z_stream zs{};
  if (deflateInit2(&zs, kDeflateLevel, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("deflateInit2 failed");
  }
  std::vector<unsigned char> out(deflateBound(&zs, static_cast<uLong>(text.size())));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
  zs.avail_in = static_cast<uInt>(text.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t length = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("deflate did not finish");
  return length;
}

double loss_score(const SampleRecord& record) {
  return signals::sequence_loss(record, signals::Cutoff::full());
}

double zlib_score(const SampleRecord& record) {
  if (!record.text || record.text->empty()) {
    throw MissingText("record '" + record.id + "' has no text for the zlib baseline");
  }
  return loss_score(record) / static_cast<double>(deflate_length(*record.text));
}

namespace {

void check_k(double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ConfigError("K must be in (0, 100]");
}

double mean_of_largest(std::vector<double> values, double k_percent) {
  const double n = static_cast<double>(values.size());
  auto count = static_cast<std::size_t>(std::ceil(k_percent * n / 100.0));
  count = std::clamp<std::size_t>(count, 1, values.size());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count),
                    values.end(), std::greater<>());
  return std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count), 0.0) /
         static_cast<double>(count);
}

}  // namespace

double min_k_score(const SampleRecord& record, double k_percent) {
  check_k(k_percent);
  if (record.losses.empty()) throw EmptyInput("record '" + record.id + "' has no losses");
  return mean_of_largest(record.losses, k_percent);
}

double min_k_pp_score(const SampleRecord& record, double k_percent) {
  check_k(k_percent);
  if (!record.vocab_mu || !record.vocab_sigma) {
    throw MissingContext("record '" + record.id + "' has no vocabulary statistics");
  }
  std::vector<double> normalized;
  normalized.reserve(record.losses.size());
  for (std::size_t t = 0; t < record.losses.size(); ++t) {
    const double sigma = (*record.vocab_sigma)[t];
    if (!(sigma > 0.0)) continue;  // sigma == 0 tokens are skipped
    normalized.push_back((record.losses[t] - (*record.vocab_mu)[t]) / sigma);
  }
  if (normalized.empty()) {
    throw DegenerateInput("record '" + record.id + "' has no token with sigma > 0");
  }
  return mean_of_largest(std::move(normalized), k_percent);
}

double reference_score(const SampleRecord& record) {
  if (!record.ref_losses) {
    throw MissingContext("record '" + record.id + "' has no reference losses");
  }
  return loss_score(record) - signals::sequence_loss(*record.ref_losses, signals::Cutoff::full());
}

std::vector<std::string> bag_of_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<BaselineScore> blind_baseline(const LabeledDataset& train, const LabeledDataset& eval) {
  std::unordered_map<std::string, std::array<double, 2>> counts;  // [member, nonmember]
  std::array<double, 2> docs{0, 0};
  std::array<double, 2> totals{0, 0};

  for (const auto& r : train) {
    if (r.label == Label::unknown) continue;
    if (!r.text) throw MissingText("training record '" + r.id + "' has no text");
    const std::size_t cls = r.label == Label::member ? 0 : 1;
    docs[cls] += 1;
    for (auto& w : bag_of_words(*r.text)) {
      counts[w][cls] += 1;
      totals[cls] += 1;
    }
  }
  if (docs[0] == 0 || docs[1] == 0) {
    throw TrainError("blind baseline needs both members and non-members in training");
  }

  const double vocab = static_cast<double>(counts.size());
  const double log_prior_ratio = std::log(docs[0]) - std::log(docs[1]);
  const double log_denom_m = std::log(totals[0] + vocab);
  const double log_denom_n = std::log(totals[1] + vocab);

  std::vector<BaselineScore> out;
  out.reserve(eval.size());
  for (const auto& r : eval) {
    if (!r.text) throw MissingText("evaluation record '" + r.id + "' has no text");
    double llr = log_prior_ratio;
    for (auto& w : bag_of_words(*r.text)) {
      auto it = counts.find(w);
      if (it == counts.end()) continue;
      llr += (std::log(it->second[0] + 1.0) - log_denom_m) -
             (std::log(it->second[1] + 1.0) - log_denom_n);
    }
    out.push_back({r.id, Method::blind_nb, 1.0 / (1.0 + std::exp(-llr))});
  }
  return out;
}

}  // namespace mia::baselines
