#include "magnav/nav_state.hpp"

#include "magnav/errors.hpp"

namespace magnav {

NavState propagate(const NavState& x, const OdometryInput& u) {
  if (!(u.dt_s > 0.0)) throw ValidationError("odometry dt must be positive");
  NavState out;
  out.v_mps = rotate(x.q, u.v_body_mps);
  out.r_m = x.r_m + out.v_mps * u.dt_s;
  out.q = boxplus(x.q, u.omega_body_rps * u.dt_s);
  return out;
}

NavState propagate(const NavState& x, const OdometryInput& u,
                   const Eigen::Matrix<double, 6, 6>& noise_chol, Rng& rng) {
  NavState out = propagate(x, u);
  Eigen::Matrix<double, 6, 1> white;
  for (int i = 0; i < 6; ++i) white[i] = rng.normal();
  const Eigen::Matrix<double, 6, 1> noise = noise_chol * white;
  out.r_m += noise.head<3>();
  out.q = boxplus(out.q, noise.tail<3>());
  return out;
}

Eigen::Matrix<double, 6, 6> psd_cholesky(const Eigen::Matrix<double, 6, 6>& m) {
  Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(m);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-12) {
    throw ValidationError("process noise covariance must be PSD");
  }
  const Eigen::Matrix<double, 6, 6> l = ldlt.matrixL();
  const Eigen::Matrix<double, 6, 1> d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  return ldlt.transpositionsP().transpose() * (l * d.asDiagonal());
}

}  // namespace magnav
