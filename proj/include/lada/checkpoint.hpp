#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "lada/model.hpp"

namespace lada {

// Versioned JSON: {"format": "lada-checkpoint", "version": 1, "dims": {...},
// "binning": {...}, "params": {"<block>": {"rows", "cols", "data"}}}.
nlohmann::json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// Loads and rejects a checkpoint whose dims differ from `expected`.
Model load_checkpoint(const std::string& path, const ModelDims& expected);

nlohmann::json to_json(const ModelDims& dims);
ModelDims dims_from_json(const nlohmann::json& j);

}  // namespace lada
