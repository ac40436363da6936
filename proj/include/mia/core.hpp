#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mia/errors.hpp"

namespace mia {

enum class Label { member, nonmember, unknown };

std::string_view to_string(Label label);
/// Accepts "member", "nonmember", "unknown".
std::optional<Label> parse_label(std::string_view text);

/// One text as seen through a black-box language model.
///
/// `losses[i]` is the cross-entropy (nats) of token `token_ids[i + 1]` given
/// all tokens before it, so every loss-like sequence has length T - 1 where
/// T = token_ids.size(). Signal formulas index this sequence from 1.
struct SampleRecord {
  std::string id;
  std::string domain;
  Label label = Label::unknown;
  std::optional<std::string> text;
  std::vector<std::uint64_t> token_ids;
  std::vector<double> losses;
  /// Losses of the second copy when the model reads X + " " + X.
  std::optional<std::vector<double>> rep1_losses;
  /// Losses of the third copy when the model reads X + " " + X + " " + X.
  std::optional<std::vector<double>> rep2_losses;
  /// Same tokens under a reference model.
  std::optional<std::vector<double>> ref_losses;
  /// Mean / std of next-token log-probability over the vocabulary per prefix.
  std::optional<std::vector<double>> vocab_mu;
  std::optional<std::vector<double>> vocab_sigma;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Throws ValidationError naming the offending field.
void validate(const SampleRecord& record);

/// Immutable, id-unique collection of records.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  /// Validates every record and id uniqueness.
  explicit LabeledDataset(std::vector<SampleRecord> records,
                          std::map<std::string, std::string> provenance = {});

  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  const std::map<std::string, std::string>& provenance() const noexcept {
    return provenance_;
  }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const SampleRecord& operator[](std::size_t i) const { return records_[i]; }

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

 private:
  std::vector<SampleRecord> records_;
  std::map<std::string, std::string> provenance_;
};

/// Reads newline-delimited JSON trace records. Blank lines are skipped;
/// unknown keys are ignored.
LabeledDataset parse_records(std::istream& in);
LabeledDataset read_trace_file(const std::string& path);

/// Writes one JSON object per line with keys in the documented order.
void serialize_records(const LabeledDataset& dataset, std::ostream& out);
std::string serialize_record(const SampleRecord& record);
void write_trace_file(const LabeledDataset& dataset, const std::string& path);

// ---------------------------------------------------------------------------
// Splitting

enum class SplitMode { nonmember_only, member_and_nonmember };

std::string_view to_string(SplitMode mode);
std::optional<SplitMode> parse_split_mode(std::string_view text);

struct SplitSpec {
  double alpha = 30.0;  ///< percentage, strictly inside (0, 100)
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::member_and_nonmember;

  void validate() const;
};

/// Index form of a split; both lists ascending.
struct SplitIndices {
  std::vector<std::size_t> attack;
  std::vector<std::size_t> target;
};

/// Per label class, floor(alpha * n / 100) indices are drawn without
/// replacement by a partial Fisher-Yates shuffle over the class's indices in
/// input order, using Rng(seed). Members are drawn before non-members.
/// Records labelled unknown always land in the target set.
SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec);

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        const SplitSpec& spec);

}  // namespace mia
