#pragma once

#include <string>

#include "magnav/map_model.hpp"
#include "magnav/sensors.hpp"

#include <json.hpp>

namespace magnav {

// Map document: {"spec": {...}, "mean": [...], "covariance": [row-major]}.
// A missing covariance denotes a deterministic map.
nlohmann::json map_to_json(const MapPosterior& mp);
MapPosterior map_from_json(const nlohmann::json& j);

nlohmann::json basis_spec_to_json(const BasisSpec& spec);
BasisSpec basis_spec_from_json(const nlohmann::json& j);

void save_map(const MapPosterior& mp, const std::string& path);
MapPosterior load_map(const std::string& path);

// Calibration document: {"A": [row-major 9], "b": [3], "residual": x}.
nlohmann::json calibration_to_json(const CalibrationResult& cal);

}  // namespace magnav
