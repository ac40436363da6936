#include "mia/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "mia/rng.hpp"

namespace mia {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::member: return "member";
    case Label::nonmember: return "nonmember";
    case Label::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "member") return Label::member;
  if (text == "nonmember") return Label::nonmember;
  if (text == "unknown") return Label::unknown;
  return std::nullopt;
}

namespace {

void check_loss_like(const SampleRecord& r, const char* field,
                     const std::vector<double>& values, bool non_negative) {
  if (values.size() + 1 != r.token_ids.size()) {
    throw ValidationError(r.id, field,
                          "length " + std::to_string(values.size()) + ", expected " +
                              std::to_string(r.token_ids.size() - 1) +
                              " (token count - 1)");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError(r.id, field, "non-finite value at index " + std::to_string(i));
    }
    if (non_negative && values[i] < 0.0) {
      throw ValidationError(r.id, field, "negative value at index " + std::to_string(i));
    }
  }
}

}  // namespace

void validate(const SampleRecord& r) {
  if (r.id.empty()) throw ValidationError(r.id, "id", "empty id");
  if (r.token_ids.size() < 2) {
    throw ValidationError(r.id, "token_ids", "need at least 2 tokens");
  }
  check_loss_like(r, "losses", r.losses, true);
  if (r.rep1_losses) check_loss_like(r, "rep1_losses", *r.rep1_losses, true);
  if (r.rep2_losses) check_loss_like(r, "rep2_losses", *r.rep2_losses, true);
  if (r.ref_losses) check_loss_like(r, "ref_losses", *r.ref_losses, true);
  if (r.vocab_mu) check_loss_like(r, "vocab_mu", *r.vocab_mu, false);
  if (r.vocab_sigma) check_loss_like(r, "vocab_sigma", *r.vocab_sigma, true);
  if (r.vocab_mu.has_value() != r.vocab_sigma.has_value()) {
    throw ValidationError(r.id, r.vocab_mu ? "vocab_sigma" : "vocab_mu",
                          "vocab_mu and vocab_sigma must be given together");
  }
}

LabeledDataset::LabeledDataset(std::vector<SampleRecord> records,
                               std::map<std::string, std::string> provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
  std::set<std::string_view> seen;
  for (const auto& r : records_) {
    validate(r);
    if (!seen.insert(r.id).second) throw ValidationError(r.id, "id", "duplicate id");
  }
}

// ---------------------------------------------------------------------------
// Trace file

namespace {

std::vector<double> read_reals(const ordered_json& value, std::size_t line, const char* key) {
  if (!value.is_array()) throw ParseError(line, std::string("'") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) {
      throw ParseError(line, std::string("'") + key + "' must contain only numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

std::optional<std::vector<double>> read_optional_reals(const ordered_json& obj, std::size_t line,
                                                       const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return read_reals(*it, line, key);
}

const ordered_json& require(const ordered_json& obj, std::size_t line, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing key '") + key + "'");
  return *it;
}

SampleRecord record_from_json(const ordered_json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError(line, "record must be a JSON object");
  SampleRecord r;

  const auto& id = require(obj, line, "id");
  if (!id.is_string()) throw ParseError(line, "'id' must be a string");
  r.id = id.get<std::string>();

  const auto& domain = require(obj, line, "domain");
  if (!domain.is_string()) throw ParseError(line, "'domain' must be a string");
  r.domain = domain.get<std::string>();

  const auto& label = require(obj, line, "label");
  if (!label.is_string()) throw ParseError(line, "'label' must be a string");
  auto parsed = parse_label(label.get<std::string>());
  if (!parsed) throw ValidationError(r.id, "label", "unknown label '" + label.get<std::string>() + "'");
  r.label = *parsed;

  if (auto it = obj.find("text"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line, "'text' must be a string");
    r.text = it->get<std::string>();
  }

  const auto& tokens = require(obj, line, "token_ids");
  if (!tokens.is_array()) throw ParseError(line, "'token_ids' must be an array");
  r.token_ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.is_number_unsigned()) {
      r.token_ids.push_back(t.get<std::uint64_t>());
    } else if (t.is_number_integer()) {
      throw ValidationError(r.id, "token_ids", "negative token id");
    } else {
      throw ParseError(line, "'token_ids' must contain only integers");
    }
  }

  r.losses = read_reals(require(obj, line, "losses"), line, "losses");
  r.rep1_losses = read_optional_reals(obj, line, "rep1_losses");
  r.rep2_losses = read_optional_reals(obj, line, "rep2_losses");
  r.ref_losses = read_optional_reals(obj, line, "ref_losses");
  r.vocab_mu = read_optional_reals(obj, line, "vocab_mu");
  r.vocab_sigma = read_optional_reals(obj, line, "vocab_sigma");
  return r;
}

}  // namespace

LabeledDataset parse_records(std::istream& in) {
  std::vector<SampleRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    SampleRecord r = record_from_json(obj, line_no);
    validate(r);
    if (!seen.insert(r.id).second) throw ValidationError(r.id, "id", "duplicate id");
    records.push_back(std::move(r));
  }
  return LabeledDataset(std::move(records));
}

LabeledDataset read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file '" + path + "'");
  auto parsed = parse_records(in);
  std::vector<SampleRecord> records(parsed.begin(), parsed.end());
  return LabeledDataset(std::move(records), {{"source", path}});
}

std::string serialize_record(const SampleRecord& r) {
  ordered_json obj;
  obj["id"] = r.id;
  obj["domain"] = r.domain;
  obj["label"] = std::string(to_string(r.label));
  if (r.text) obj["text"] = *r.text;
  obj["token_ids"] = r.token_ids;
  obj["losses"] = r.losses;
  if (r.rep1_losses) obj["rep1_losses"] = *r.rep1_losses;
  if (r.rep2_losses) obj["rep2_losses"] = *r.rep2_losses;
  if (r.ref_losses) obj["ref_losses"] = *r.ref_losses;
  if (r.vocab_mu) obj["vocab_mu"] = *r.vocab_mu;
  if (r.vocab_sigma) obj["vocab_sigma"] = *r.vocab_sigma;
  return obj.dump();
}

void serialize_records(const LabeledDataset& dataset, std::ostream& out) {
  for (const auto& r : dataset) out << serialize_record(r) << '\n';
}

void write_trace_file(const LabeledDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file '" + path + "'");
  serialize_records(dataset, out);
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Splitting

std::string_view to_string(SplitMode mode) {
  return mode == SplitMode::nonmember_only ? "nonmember_only" : "member_and_nonmember";
}

std::optional<SplitMode> parse_split_mode(std::string_view text) {
  if (text == "nonmember_only") return SplitMode::nonmember_only;
  if (text == "member_and_nonmember") return SplitMode::member_and_nonmember;
  return std::nullopt;
}

void SplitSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 100.0)) {
    throw ConfigError("split alpha must be strictly between 0 and 100");
  }
}

namespace {

std::vector<std::size_t> draw(Rng& rng, std::vector<std::size_t> pool, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

SplitIndices split_indices(std::span<const Label> labels, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> members;
  std::vector<std::size_t> nonmembers;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == Label::member) members.push_back(i);
    if (labels[i] == Label::nonmember) nonmembers.push_back(i);
  }
  auto quota = [&](std::size_t n) {
    return static_cast<std::size_t>(std::floor(spec.alpha * static_cast<double>(n) / 100.0));
  };

  Rng rng(spec.seed);
  std::vector<bool> in_attack(labels.size(), false);
  auto take = [&](const std::vector<std::size_t>& cls, const char* name) {
    const std::size_t k = quota(cls.size());
    if (k == 0) {
      throw SplitError(std::string("alpha=") + std::to_string(spec.alpha) + " selects no " + name +
                       " out of " + std::to_string(cls.size()));
    }
    for (std::size_t i : draw(rng, cls, k)) in_attack[i] = true;
  };
  if (spec.mode == SplitMode::member_and_nonmember) take(members, "members");
  take(nonmembers, "non-members");

  SplitIndices out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (in_attack[i] ? out.attack : out.target).push_back(i);
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        const SplitSpec& spec) {
  std::vector<Label> labels;
  labels.reserve(dataset.size());
  for (const auto& r : dataset) labels.push_back(r.label);
  const auto idx = split_indices(labels, spec);

  auto gather = [&](const std::vector<std::size_t>& which, const char* role) {
    std::vector<SampleRecord> out;
    out.reserve(which.size());
    for (std::size_t i : which) out.push_back(dataset[i]);
    auto prov = dataset.provenance();
    prov["split_role"] = role;
    prov["split_alpha"] = std::to_string(spec.alpha);
    prov["split_seed"] = std::to_string(spec.seed);
    prov["split_mode"] = std::string(to_string(spec.mode));
    return LabeledDataset(std::move(out), std::move(prov));
  };
  return {gather(idx.attack, "attack"), gather(idx.target, "target")};
}

}  // namespace mia
