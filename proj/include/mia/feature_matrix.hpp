#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mia/core.hpp"
#include "mia/signals.hpp"

namespace mia {

using FeatureRow = std::vector<std::optional<double>>;

/// One row per record: id, label, then feature values in column order.
/// Missing values are std::nullopt in memory and "NA" on disk.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<std::string> ids;
  std::vector<Label> labels;
  std::vector<FeatureRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;
  /// Columns that are signals (everything not prefixed "baseline_").
  std::vector<std::string> signal_columns() const;
};

inline constexpr std::string_view kMissingToken = "NA";
inline constexpr std::string_view kBaselinePrefix = "baseline_";

/// Comma-separated, RFC 4180 quoting, header row first. Reals are written
/// in shortest round-trip form.
void write_feature_matrix(const FeatureMatrix& matrix, std::ostream& out);
void write_feature_matrix(const FeatureMatrix& matrix, const std::string& path);
FeatureMatrix read_feature_matrix(std::istream& in);
FeatureMatrix read_feature_matrix(const std::string& path);

struct ExtractionOptions {
  signals::SignalConfig signals;
  bool baselines = true;
  double min_k_percent = 20.0;
  /// 0 means std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct ExtractionResult {
  FeatureMatrix matrix;
  /// (record id, note) pairs from feature extraction.
  std::vector<std::pair<std::string, std::string>> notes;
};

/// Feature matrix for every record. Columns follow the signal catalog, then
/// baseline_loss, baseline_zlib, baseline_min_k, baseline_min_k_pp,
/// baseline_reference. Output is independent of the thread count.
ExtractionResult extract_feature_matrix(const LabeledDataset& dataset,
                                        const ExtractionOptions& options);

// CSV helpers shared by the other delimited outputs.
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split(std::string_view line);

}  // namespace mia
