#pragma once

#include <json.hpp>

#include "numerics/mlp.hpp"

namespace deflow {

/// {"layer_sizes": [...], "activation": "relu", "tensors": {"w0": {"shape": [...], "values": [...]}, "b0": ...}}
/// Values are emitted with a round-trip-exact decimal encoding.
nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& doc);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& doc, const std::string& what);

}  // namespace deflow
