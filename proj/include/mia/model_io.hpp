#pragma once

#include <string>

#include <json.hpp>

#include "mia/composition.hpp"

namespace mia {

/// Attack models serialize to a JSON document:
///
///   {"format": "mia-attack-model", "version": 1, "kind": "pvalue" | "lr", ...}
///
/// pvalue: combiner, features[{name, group, orientation}], pools[[...]]
/// lr:     features[{name, group}], impute[], gpca (null or groups[{name,
///         columns, mean, scale, eigenvalues, directions (row-major)}]),
///         inputs[{name, group, column, mean, scale}], weights[], bias,
///         dropped[], options{learning_rate, epochs, ridge, pca_components}
///
/// Reals are written in shortest round-trip form, so a reloaded model scores
/// bit-identically.
inline constexpr const char* kModelFormat = "mia-attack-model";
inline constexpr int kModelVersion = 1;

nlohmann::ordered_json model_to_json(const composition::AttackModel& model);
composition::AttackModel model_from_json(const nlohmann::ordered_json& doc);

void save_model(const composition::AttackModel& model, const std::string& path);
composition::AttackModel load_model(const std::string& path);

}  // namespace mia
