#pragma once

#include <Eigen/Dense>

#include "magnav/geometry.hpp"
#include "magnav/rng.hpp"

namespace magnav {

struct NavState {
  Eigen::Vector3d r_m = Eigen::Vector3d::Zero();
  Eigen::Vector3d v_mps = Eigen::Vector3d::Zero();
  UnitOrientation q;  // sensor (body) to map
};

// Body-frame odometry over one interval. noise_cov is the per-step process
// noise on (position, orientation tangent), m^2 and rad^2.
struct OdometryInput {
  double dt_s = 0.0;
  Eigen::Vector3d v_body_mps = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega_body_rps = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 6, 6> noise_cov = Eigen::Matrix<double, 6, 6>::Zero();
};

// Deterministic mean propagation: r += R(q) v_body dt, q = q (+) omega dt.
NavState propagate(const NavState& x, const OdometryInput& u);

// Propagation with additive noise drawn from u.noise_cov via its
// lower-triangular factor (so the factorization is shared across particles).
NavState propagate(const NavState& x, const OdometryInput& u,
                   const Eigen::Matrix<double, 6, 6>& noise_chol, Rng& rng);

// Lower Cholesky factor of a PSD matrix (tolerates zero diagonal blocks).
Eigen::Matrix<double, 6, 6> psd_cholesky(const Eigen::Matrix<double, 6, 6>& m);

}  // namespace magnav
