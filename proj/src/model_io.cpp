#include "mia/model_io.hpp"

#include <fstream>

namespace mia {

using nlohmann::ordered_json;
using namespace composition;

namespace {

ordered_json options_to_json(const LROptions& o) {
  ordered_json j;
  j["learning_rate"] = o.learning_rate;
  j["epochs"] = o.epochs;
  j["ridge"] = o.ridge;
  j["pca_components"] = o.pca_components ? ordered_json(*o.pca_components) : ordered_json(nullptr);
  return j;
}

LROptions options_from_json(const ordered_json& j) {
  LROptions o;
  o.learning_rate = j.at("learning_rate").get<double>();
  o.epochs = j.at("epochs").get<std::size_t>();
  o.ridge = j.at("ridge").get<double>();
  if (!j.at("pca_components").is_null()) o.pca_components = j.at("pca_components").get<std::size_t>();
  return o;
}

ordered_json to_json(const PValueComposer& m) {
  ordered_json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["kind"] = "pvalue";
  doc["combiner"] = std::string(to_string(m.combiner()));
  auto& feats = doc["features"] = ordered_json::array();
  for (std::size_t j = 0; j < m.features().size(); ++j) {
    feats.push_back({{"name", m.features().names[j]},
                     {"group", m.features().groups[j]},
                     {"orientation", std::string(to_string(m.orientation()[j]))}});
  }
  doc["pools"] = m.pools();
  return doc;
}

ordered_json to_json(const LRModel& m) {
  if (!m.fitted) throw StateError("cannot serialize an unfitted model");
  ordered_json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  doc["kind"] = "lr";
  auto& feats = doc["features"] = ordered_json::array();
  for (std::size_t j = 0; j < m.features.size(); ++j) {
    feats.push_back({{"name", m.features.names[j]}, {"group", m.features.groups[j]}});
  }
  doc["impute"] = m.impute;
  if (m.gpca) {
    auto& groups = doc["gpca"]["groups"] = ordered_json::array();
    for (const auto& g : m.gpca->groups) {
      std::vector<double> dirs;
      for (Eigen::Index r = 0; r < g.directions.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.directions.cols(); ++c) dirs.push_back(g.directions(r, c));
      }
      groups.push_back({{"name", g.name},
                        {"columns", g.columns},
                        {"mean", g.mean},
                        {"scale", g.scale},
                        {"eigenvalues", g.eigenvalues},
                        {"components", g.directions.cols()},
                        {"directions", dirs}});
    }
  } else {
    doc["gpca"] = nullptr;
  }
  auto& inputs = doc["inputs"] = ordered_json::array();
  for (std::size_t k = 0; k < m.kept.size(); ++k) {
    inputs.push_back({{"name", m.inputs.names[k]},
                      {"group", m.inputs.groups[k]},
                      {"column", m.kept[k]},
                      {"mean", m.mean[k]},
                      {"scale", m.scale[k]}});
  }
  doc["weights"] = m.weights;
  doc["bias"] = m.bias;
  doc["dropped"] = m.dropped;
  doc["options"] = options_to_json(m.options);
  return doc;
}

PValueComposer pvalue_from_json(const ordered_json& doc) {
  auto combiner = parse_combiner(doc.at("combiner").get<std::string>());
  if (!combiner) throw ConfigError("unknown combiner in model file");
  FeatureSet fs;
  std::vector<Orientation> orientation;
  for (const auto& f : doc.at("features")) {
    fs.names.push_back(f.at("name").get<std::string>());
    fs.groups.push_back(f.at("group").get<std::string>());
    auto o = parse_orientation(f.at("orientation").get<std::string>());
    if (!o) throw ConfigError("unknown orientation in model file");
    orientation.push_back(*o);
  }
  return PValueComposer(std::move(fs), std::move(orientation),
                        doc.at("pools").get<std::vector<std::vector<double>>>(), *combiner);
}

LRModel lr_from_json(const ordered_json& doc) {
  LRModel m;
  for (const auto& f : doc.at("features")) {
    m.features.names.push_back(f.at("name").get<std::string>());
    m.features.groups.push_back(f.at("group").get<std::string>());
  }
  m.impute = doc.at("impute").get<std::vector<double>>();
  if (!doc.at("gpca").is_null()) {
    GroupPCA pca;
    for (const auto& g : doc.at("gpca").at("groups")) {
      PcaGroup pg;
      pg.name = g.at("name").get<std::string>();
      pg.columns = g.at("columns").get<std::vector<std::size_t>>();
      pg.mean = g.at("mean").get<std::vector<double>>();
      pg.scale = g.at("scale").get<std::vector<double>>();
      pg.eigenvalues = g.at("eigenvalues").get<std::vector<double>>();
      const auto comps = g.at("components").get<Eigen::Index>();
      const auto dirs = g.at("directions").get<std::vector<double>>();
      const auto rows = static_cast<Eigen::Index>(pg.columns.size());
      if (static_cast<Eigen::Index>(dirs.size()) != rows * comps) {
        throw ConfigError("PCA directions have the wrong size in model file");
      }
      pg.directions.resize(rows, comps);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < comps; ++c) pg.directions(r, c) = dirs[static_cast<std::size_t>(r * comps + c)];
      }
      pca.groups.push_back(std::move(pg));
    }
    m.gpca = std::move(pca);
  }
  for (const auto& in : doc.at("inputs")) {
    m.inputs.names.push_back(in.at("name").get<std::string>());
    m.inputs.groups.push_back(in.at("group").get<std::string>());
    m.kept.push_back(in.at("column").get<std::size_t>());
    m.mean.push_back(in.at("mean").get<double>());
    m.scale.push_back(in.at("scale").get<double>());
  }
  m.weights = doc.at("weights").get<std::vector<double>>();
  m.bias = doc.at("bias").get<double>();
  m.dropped = doc.at("dropped").get<std::vector<std::string>>();
  m.options = options_from_json(doc.at("options"));
  if (m.weights.size() != m.kept.size() || m.impute.size() != m.features.size()) {
    throw ConfigError("inconsistent dimensions in model file");
  }
  m.fitted = true;
  return m;
}

}  // namespace

ordered_json model_to_json(const AttackModel& model) {
  return std::visit([](const auto& m) { return to_json(m); }, model);
}

AttackModel model_from_json(const ordered_json& doc) {
  if (doc.value("format", "") != kModelFormat) throw ConfigError("not an attack model document");
  if (doc.value("version", 0) != kModelVersion) {
    throw ConfigError("unsupported model version " + std::to_string(doc.value("version", 0)));
  }
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "pvalue") return pvalue_from_json(doc);
  if (kind == "lr") return lr_from_json(doc);
  throw ConfigError("unknown model kind '" + kind + "'");
}

void save_model(const AttackModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model '" + path + "'");
  out << model_to_json(model).dump(1) << '\n';
}

AttackModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model '" + path + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("model file: ") + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace mia
