#include "magnav/scenario.hpp"

#include <cmath>
#include <fstream>

#include "magnav/errors.hpp"
#include "magnav/map_io.hpp"

namespace magnav {

using nlohmann::json;

namespace {

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected 3-vector");
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

TruthField field_from_json(const json& j) {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  if (j.contains("background_t")) background = vec3(j["background_t"]);
  std::vector<DipoleSource> dipoles;
  if (j.contains("dipoles")) {
    for (const auto& d : j["dipoles"]) {
      dipoles.push_back({vec3(d.at("position_m")), vec3(d.at("moment_am2"))});
    }
  }
  std::optional<TemporalDisturbance> temporal;
  if (j.contains("temporal") && !j["temporal"].is_null()) {
    const auto& t = j["temporal"];
    temporal = TemporalDisturbance{t.at("amplitude_t").get<double>(),
                                   t.at("period_s").get<double>(),
                                   vec3(t.at("direction"))};
  }
  const double excl = j.value("exclusion_radius_m", 0.05);
  return TruthField(background, std::move(dipoles), temporal, excl);
}

TrajectoryConfig trajectory_from_json(const json& j) {
  TrajectoryConfig c;
  const std::string type = j.value("type", "waypoints");
  if (type == "waypoints") {
    c.type = TrajectoryConfig::Type::kWaypoints;
    for (const auto& p : j.at("points_m")) c.points_m.push_back(vec3(p));
    if (c.points_m.empty()) throw ValidationError("waypoints trajectory needs points");
  } else if (type == "circle") {
    c.type = TrajectoryConfig::Type::kCircle;
    c.center_m = vec3(j.at("center_m"));
    c.radius_m = j.at("radius_m").get<double>();
    c.turns = j.value("turns", 1.0);
    if (c.radius_m <= 0.0) throw ValidationError("circle radius must be positive");
  } else if (type == "line") {
    c.type = TrajectoryConfig::Type::kLine;
    for (const auto& p : j.at("points_m")) c.points_m.push_back(vec3(p));
    if (c.points_m.size() != 2) throw ValidationError("line trajectory needs 2 points");
  } else {
    throw ValidationError("unknown trajectory type: " + type);
  }
  c.speed_mps = j.value("speed_mps", 1.0);
  c.hold_s = j.value("hold_s", 0.0);
  if (j.contains("fixed_yaw_rad")) c.fixed_yaw_rad = j["fixed_yaw_rad"].get<double>();
  if (c.speed_mps < 0.0) throw ValidationError("speed must be >= 0");
  return c;
}

SensorConfig sensors_from_json(const json& j) {
  SensorConfig c;
  const std::string kind = j.value("kind", "vector");
  if (kind == "vector") {
    c.kind = MeasurementKind::kVectorField;
  } else if (kind == "magnitude") {
    c.kind = MeasurementKind::kMagnitude;
  } else {
    throw ValidationError("sensor kind must be vector or magnitude");
  }
  c.noise_std_t = j.value("noise_std_t", 0.0);
  c.rate_hz = j.value("rate_hz", 10.0);
  if (!(c.rate_hz > 0.0)) throw ValidationError("rate_hz must be positive");
  if (j.contains("affine_a") && !j["affine_a"].is_null()) {
    const auto a = j["affine_a"].get<std::vector<double>>();
    if (a.size() != 9) throw ValidationError("affine_a needs 9 row-major entries");
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) c.affine_a(r, col) = a[3 * r + col];
    }
  }
  if (j.contains("offset_b_t") && !j["offset_b_t"].is_null()) {
    c.offset_b_t = vec3(j["offset_b_t"]);
  }
  if (j.contains("array_offsets_m") && !j["array_offsets_m"].is_null()) {
    ArrayGeometry geom;
    for (const auto& d : j["array_offsets_m"]) geom.offsets_m.push_back(vec3(d));
    if (geom.size() < 2) throw ValidationError("array needs >= 2 offsets");
    c.array = std::move(geom);
  }
  if (j.contains("reference_position_m") && !j["reference_position_m"].is_null()) {
    c.reference_position_m = vec3(j["reference_position_m"]);
  }
  return c;
}

EstimatorConfig estimator_from_json(const json& j) {
  EstimatorConfig c;
  const std::string technique = j.at("technique").get<std::string>();
  if (technique == "map_match") {
    c.technique = Technique::kMapMatch;
  } else if (technique == "slam") {
    c.technique = Technique::kSlam;
  } else if (technique == "dead_reckon") {
    c.technique = Technique::kDeadReckon;
  } else {
    throw ValidationError("unknown technique: " + technique);
  }
  c.n_particles = j.value("n_particles", 500);
  if (c.n_particles < 1) throw ValidationError("n_particles must be >= 1");
  c.ess_threshold = j.value("ess_threshold", 0.5);
  if (j.contains("likelihood_floor")) {
    const double floor = j["likelihood_floor"].get<double>();
    if (!(floor > 0.0)) throw ValidationError("likelihood_floor must be positive");
    c.likelihood_floor_log = std::log(floor);
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.parallel = j.value("parallel", true);
  c.init_pos_std_m = j.value("init_pos_std_m", 0.0);
  c.init_yaw_std_rad = j.value("init_yaw_std_rad", 0.0);
  if (j.contains("init_uniform_box") && !j["init_uniform_box"].is_null()) {
    Box b;
    b.min_m = vec3(j["init_uniform_box"].at("min_m"));
    b.max_m = vec3(j["init_uniform_box"].at("max_m"));
    c.init_uniform_box = b;
  }
  if (j.contains("q_map_scales")) {
    const auto s = j["q_map_scales"].get<std::vector<double>>();
    if (s.size() != 2) throw ValidationError("q_map_scales needs 2 entries");
    c.b0_walk_per_m = s[0];
    c.g_walk_per_m = s[1];
  }
  c.nees_gate = j.value("nees_gate", 3.0);
  c.gate_count = j.value("gate_count", 20);
  return c;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  Scenario s;
  if (!j.contains("seed")) {
    throw ValidationError("scenario requires a seed (reproducibility contract)");
  }
  s.seed = j["seed"].get<std::uint64_t>();
  s.field = field_from_json(j.value("field", json::object()));
  s.trajectory = trajectory_from_json(j.at("trajectory"));
  s.sensors = sensors_from_json(j.value("sensors", json::object()));
  if (j.contains("odometry")) {
    const auto& o = j["odometry"];
    s.odometry.pos_noise_frac = o.value("pos_noise_frac", 0.0);
    s.odometry.pos_noise_floor_m = o.value("pos_noise_floor_m", 0.0);
    s.odometry.ang_noise_rad = o.value("ang_noise_rad", 0.0);
  }
  s.estimator = estimator_from_json(j.at("estimator"));
  if (j.contains("map") && !j["map"].is_null()) {
    const auto& m = j["map"];
    if (m.contains("path")) s.map_path = m["path"].get<std::string>();
    if (m.contains("spec")) s.slam_basis = basis_spec_from_json(m["spec"]);
    s.slam_grid_prior_std = m.value("prior_std", 0.0);
  }
  if (s.estimator.technique == Technique::kMapMatch && !s.map_path) {
    throw ValidationError("map matching requires map.path");
  }
  if (s.estimator.technique == Technique::kSlam && !s.slam_basis) {
    throw ValidationError("SLAM requires map.spec");
  }
  if (s.estimator.technique == Technique::kDeadReckon) {
    if (!s.sensors.array) throw ValidationError("dead reckoning requires an array");
    if (s.sensors.kind != MeasurementKind::kVectorField) {
      throw ValidationError("dead reckoning requires vector sensors");
    }
  }
  if (s.sensors.reference_position_m &&
      s.sensors.kind != MeasurementKind::kVectorField) {
    throw ValidationError("reference compensation requires vector sensors");
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario JSON parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace magnav
