#pragma once

#include <optional>
#include <string>

#include "magnav/array_dr.hpp"
#include "magnav/map_model.hpp"
#include "magnav/nav_state.hpp"
#include "magnav/sensors.hpp"
#include "magnav/truth_field.hpp"

#include <json.hpp>

namespace magnav {

struct TrajectoryConfig {
  enum class Type { kWaypoints, kCircle, kLine };
  Type type = Type::kWaypoints;
  std::vector<Eigen::Vector3d> points_m;  // waypoints / line endpoints
  Eigen::Vector3d center_m = Eigen::Vector3d::Zero();  // circle
  double radius_m = 1.0;
  double turns = 1.0;
  double speed_mps = 1.0;
  double hold_s = 0.0;  // stationary dwell at the start point
  std::optional<double> fixed_yaw_rad;  // default: yaw follows velocity
};

// Per-step odometry error model: position noise std (per axis, body frame)
// = pos_noise_frac * step distance + pos_noise_floor_m; orientation tangent
// noise std = ang_noise_rad per step.
struct OdometryConfig {
  double pos_noise_frac = 0.0;
  double pos_noise_floor_m = 0.0;
  double ang_noise_rad = 0.0;
};

struct SensorConfig {
  MeasurementKind kind = MeasurementKind::kVectorField;
  double noise_std_t = 0.0;
  double rate_hz = 10.0;
  Eigen::Matrix3d affine_a = Eigen::Matrix3d::Identity();
  Eigen::Vector3d offset_b_t = Eigen::Vector3d::Zero();
  std::optional<ArrayGeometry> array;
  std::optional<Eigen::Vector3d> reference_position_m;
};

enum class Technique { kMapMatch, kSlam, kDeadReckon };

struct EstimatorConfig {
  Technique technique = Technique::kMapMatch;
  int n_particles = 500;
  double ess_threshold = 0.5;
  double likelihood_floor_log = -27.631021115928547;  // log(1e-12)
  std::optional<std::uint64_t> seed;                  // default: scenario seed
  bool parallel = true;
  double init_pos_std_m = 0.0;
  double init_yaw_std_rad = 0.0;
  std::optional<Box> init_uniform_box;  // uniform position init overrides the Gaussian
  double b0_walk_per_m = 0.01;
  double g_walk_per_m = 0.05;
  double nees_gate = 3.0;
  int gate_count = 20;
};

struct Scenario {
  std::uint64_t seed = 0;
  TruthField field;
  TrajectoryConfig trajectory;
  SensorConfig sensors;
  OdometryConfig odometry;
  EstimatorConfig estimator;
  std::optional<std::string> map_path;   // map matching: fixed prior map
  std::optional<BasisSpec> slam_basis;   // SLAM: per-particle prior basis
  double slam_grid_prior_std = 0.0;      // grid prior std when slam_basis is a grid
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

}  // namespace magnav
