#include "mia/feature_matrix.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "mia/baselines.hpp"
#include "mia/format.hpp"
#include "parallel.hpp"

namespace mia {

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> FeatureMatrix::signal_columns() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.rfind(kBaselinePrefix, 0) != 0) out.push_back(c);
  }
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

void write_feature_matrix(const FeatureMatrix& m, std::ostream& out) {
  out << "id,label";
  for (const auto& c : m.columns) out << ',' << csv_escape(c);
  out << '\n';
  for (std::size_t r = 0; r < m.size(); ++r) {
    out << csv_escape(m.ids[r]) << ',' << to_string(m.labels[r]);
    for (const auto& v : m.rows[r]) {
      out << ',';
      if (v) {
        out << format_real(*v);
      } else {
        out << kMissingToken;
      }
    }
    out << '\n';
  }
}

void write_feature_matrix(const FeatureMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature matrix '" + path + "'");
  write_feature_matrix(matrix, out);
}

FeatureMatrix read_feature_matrix(std::istream& in) {
  FeatureMatrix m;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "feature matrix is empty");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = csv_split(line);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
    throw ParseError(line_no, "header must start with 'id,label'");
  }
  m.columns.assign(header.begin() + 2, header.end());

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv_split(line);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    auto label = parse_label(fields[1]);
    if (!label) throw ParseError(line_no, "invalid label '" + fields[1] + "'");
    FeatureRow row;
    row.reserve(m.columns.size());
    for (std::size_t i = 2; i < fields.size(); ++i) {
      if (fields[i] == kMissingToken) {
        row.emplace_back(std::nullopt);
        continue;
      }
      auto v = parse_real(fields[i]);
      if (!v) throw ParseError(line_no, "invalid number '" + fields[i] + "'");
      row.emplace_back(*v);
    }
    m.ids.push_back(std::move(fields[0]));
    m.labels.push_back(*label);
    m.rows.push_back(std::move(row));
  }
  return m;
}

FeatureMatrix read_feature_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature matrix '" + path + "'");
  return read_feature_matrix(in);
}

namespace {

template <typename Fn>
std::optional<double> try_score(Fn&& fn) {
  try {
    return fn();
  } catch (const MissingContext&) {
  } catch (const MissingText&) {
  } catch (const DegenerateInput&) {
  }
  return std::nullopt;
}

}  // namespace

ExtractionResult extract_feature_matrix(const LabeledDataset& dataset,
                                        const ExtractionOptions& options) {
  options.signals.validate();
  const auto catalog = signals::feature_catalog(options.signals);

  ExtractionResult result;
  auto& m = result.matrix;
  for (const auto& e : catalog) m.columns.push_back(e.name);
  const std::size_t n_signals = m.columns.size();
  if (options.baselines) {
    for (auto method : {baselines::Method::loss, baselines::Method::zlib, baselines::Method::min_k,
                        baselines::Method::min_k_pp, baselines::Method::reference}) {
      m.columns.push_back(std::string(kBaselinePrefix) + std::string(baselines::to_string(method)));
    }
  }

  m.rows.assign(dataset.size(), FeatureRow(m.columns.size()));
  std::vector<std::vector<std::string>> notes(dataset.size());

  detail::parallel_for(dataset.size(), options.threads, [&](std::size_t i) {
    const auto& record = dataset[i];
    auto fv = signals::extract_feature_vector(record, options.signals);
    auto& row = m.rows[i];
    for (std::size_t c = 0; c < n_signals; ++c) {
      if (auto it = fv.values.find(catalog[c].name); it != fv.values.end()) row[c] = it->second;
    }
    notes[i] = std::move(fv.notes);
    if (options.baselines) {
      std::size_t c = n_signals;
      row[c++] = baselines::loss_score(record);
      row[c++] = try_score([&] { return baselines::zlib_score(record); });
      row[c++] = baselines::min_k_score(record, options.min_k_percent);
      row[c++] = try_score([&] { return baselines::min_k_pp_score(record, options.min_k_percent); });
      row[c++] = try_score([&] { return baselines::reference_score(record); });
    }
  });

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    m.ids.push_back(dataset[i].id);
    m.labels.push_back(dataset[i].label);
    for (auto& note : notes[i]) result.notes.emplace_back(dataset[i].id, std::move(note));
  }
  return result;
}

}  // namespace mia
