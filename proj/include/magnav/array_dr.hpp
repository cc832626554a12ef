#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "magnav/map_model.hpp"
#include "magnav/nav_state.hpp"
#include "magnav/sensors.hpp"

namespace magnav {

// Local first-order field model in the current sensor frame:
// B(d) = b0 + G d with w = [b0 (T); g-params (T/m)].
struct LocalMapState {
  Eigen::Matrix<double, 8, 1> w = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> p = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 8> q_map = Eigen::Matrix<double, 8, 8>::Zero();

  Eigen::Vector3d b0() const { return w.head<3>(); }
  Eigen::Matrix3d gradient() const { return gradient_from_params(w.tail<5>()); }
};

// v = G^-1 (Bdot - B x omega); all quantities in the sensor frame.
Eigen::Vector3d velocity_from_field(const Eigen::Vector3d& b_t,
                                    const Eigen::Vector3d& bdot_tps,
                                    const Eigen::Matrix3d& g_tpm,
                                    const Eigen::Vector3d& omega_rps);

struct DisplacementPrior {
  Eigen::Vector3d dr_mean_m = Eigen::Vector3d::Zero();
  UnitOrientation dq_mean;
  Eigen::Matrix<double, 6, 6> cov = Eigen::Matrix<double, 6, 6>::Identity();
};

struct DisplacementEstimate {
  Eigen::Vector3d dr_m;
  UnitOrientation dq;
  LocalMapState map;
  // Laplace covariance over [dr, dq-tangent, w].
  Eigen::Matrix<double, 14, 14> covariance;
  int iterations = 0;
};

// Joint MAP estimate of (displacement, rotation, local map) from two
// consecutive array scans via Gauss-Newton; orientation handled on the
// tangent chart at the prior mean.
DisplacementEstimate displacement_gn(const std::vector<FieldSample>& scan_t,
                                     const std::vector<FieldSample>& scan_t1,
                                     const ArrayGeometry& geom,
                                     const std::optional<DisplacementPrior>& prior,
                                     const Eigen::Matrix3d& r_noise);

struct DisplacementCrlb {
  // Bound over [dr, dq-tangent]; valid only when !unbounded.
  Eigen::Matrix<double, 6, 6> pose_cov;
  bool unbounded = false;
  // Unit directions of the (dr, eps) space with no information, when unbounded.
  std::vector<Eigen::Matrix<double, 6, 1>> unbounded_directions;
};

// Inverse Fisher information of the two-scan model at the truth
// (dr = 0, dq = identity, w = [b0_true; params(G_true)]), with the local map
// treated as a jointly estimated nuisance.
DisplacementCrlb crlb_displacement(const ArrayGeometry& geom,
                                   const Eigen::Matrix3d& g_true,
                                   const Eigen::Matrix3d& r_noise,
                                   const std::optional<DisplacementPrior>& prior,
                                   const Eigen::Vector3d& b0_true = Eigen::Vector3d::Zero());

struct DeadReckonConfig {
  double b0_walk_per_m = 0.01;  // map random walk, fraction of ||b0|| per meter
  double g_walk_per_m = 0.05;   // fraction of ||G||_F per meter
  double nees_gate = 3.0;       // per-dof innovation gate
  int gate_count = 20;
};

// Error-state filter state over [position error, orientation tangent, local
// map]; the joint 14x14 covariance keeps the pose-map cross terms that carry
// all position information in dead reckoning.
struct DeadReckonState {
  NavState x;
  Eigen::Matrix<double, 8, 1> w = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 14, 14> p = Eigen::Matrix<double, 14, 14>::Zero();
  double last_nis_per_dof = 0.0;
  int gate_streak = 0;
  bool diverged = false;

  Eigen::Matrix<double, 6, 6> pose_cov() const { return p.topLeftCorner<6, 6>(); }
  LocalMapState local_map() const {
    return LocalMapState{w, p.bottomRightCorner<8, 8>(),
                         Eigen::Matrix<double, 8, 8>::Zero()};
  }
};

DeadReckonState dead_reckon_init(const NavState& x0,
                                 const Eigen::Matrix<double, 6, 6>& pose_cov,
                                 const Eigen::Matrix<double, 8, 1>& w0,
                                 const Eigen::Matrix<double, 8, 8>& map_cov);

// One time update (odometry + rigid map transport) and one array measurement
// update. Strictly sequential.
DeadReckonState dead_reckon_step(const DeadReckonState& s, const OdometryInput& u,
                                 const std::vector<FieldSample>& samples,
                                 const ArrayGeometry& geom,
                                 const Eigen::Matrix3d& r_noise,
                                 const DeadReckonConfig& cfg);

}  // namespace magnav
