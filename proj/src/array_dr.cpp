#include "magnav/array_dr.hpp"

#include <cmath>
#include <limits>

#include "magnav/errors.hpp"

namespace magnav {

namespace {

using Mat14 = Eigen::Matrix<double, 14, 14>;
using Vec14 = Eigen::Matrix<double, 14, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

// 3x5 map from gradient parameters to G(params) * v.
Eigen::Matrix<double, 3, 5> gradient_action(const Eigen::Vector3d& v) {
  Eigen::Matrix<double, 3, 5> m;
  const auto& basis = gradient_basis();
  for (int i = 0; i < 5; ++i) m.col(i) = basis[i] * v;
  return m;
}

// 5x5 map of the conjugation params(R^T G(params) R).
Eigen::Matrix<double, 5, 5> gradient_conjugation(const Eigen::Matrix3d& r) {
  Eigen::Matrix<double, 5, 5> m;
  const auto& basis = gradient_basis();
  for (int i = 0; i < 5; ++i) {
    m.col(i) = params_from_gradient(r.transpose() * basis[i] * r);
  }
  return m;
}

// 5x3 map eta -> params(G [eta]x - [eta]x G), the first-order change of the
// gradient parameters under a right rotation perturbation.
Eigen::Matrix<double, 5, 3> gradient_rotation_sensitivity(const Eigen::Matrix3d& g) {
  Eigen::Matrix<double, 5, 3> m;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Matrix3d ex = skew(Eigen::Vector3d::Unit(k));
    m.col(k) = params_from_gradient(g * ex - ex * g);
  }
  return m;
}

// Predicted reading of sensor n for pose (dr, dq) relative to the map frame.
Eigen::Vector3d predict_scan2(const Eigen::Vector3d& dr, const Eigen::Matrix3d& r_dq,
                              const Eigen::Matrix<double, 8, 1>& w,
                              const Eigen::Vector3d& d_n) {
  const Eigen::Vector3d b0 = w.head<3>();
  const Eigen::Matrix3d g = gradient_from_params(w.tail<5>());
  return r_dq.transpose() * (b0 + g * (dr + r_dq * d_n));
}

struct Scan2Jacobian {
  Eigen::Matrix3d d_dr;
  Eigen::Matrix3d d_eps;
  Eigen::Matrix<double, 3, 8> d_w;
};

Scan2Jacobian scan2_jacobian(const Eigen::Vector3d& dr, const Eigen::Matrix3d& r_dq,
                             const Eigen::Matrix<double, 8, 1>& w,
                             const Eigen::Vector3d& d_n) {
  const Eigen::Matrix3d g = gradient_from_params(w.tail<5>());
  const Eigen::Matrix3d g_rot = r_dq.transpose() * g * r_dq;
  Scan2Jacobian j;
  j.d_dr = r_dq.transpose() * g;
  j.d_eps = skew(predict_scan2(dr, r_dq, w, d_n)) - g_rot * skew(d_n);
  j.d_w.leftCols<3>() = r_dq.transpose();
  j.d_w.rightCols<5>() = r_dq.transpose() * gradient_action(dr + r_dq * d_n);
  return j;
}

void check_scan(const std::vector<FieldSample>& scan, const ArrayGeometry& geom,
                const char* name) {
  if (static_cast<int>(scan.size()) != geom.size()) {
    throw ValidationError(std::string(name) + ": need one sample per array sensor");
  }
  for (const auto& s : scan) {
    if (s.kind == MeasurementKind::kMagnitude) {
      throw KindMismatch("displacement inference needs vector samples");
    }
  }
}

}  // namespace

Eigen::Vector3d velocity_from_field(const Eigen::Vector3d& b_t,
                                    const Eigen::Vector3d& bdot_tps,
                                    const Eigen::Matrix3d& g_tpm,
                                    const Eigen::Vector3d& omega_rps) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(g_tpm,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv[2] <= 0.0 || sv[0] / sv[2] > 1e8) {
    throw SingularGradient("field gradient locally uninformative");
  }
  return svd.solve(bdot_tps - b_t.cross(omega_rps));
}

DisplacementEstimate displacement_gn(const std::vector<FieldSample>& scan_t,
                                     const std::vector<FieldSample>& scan_t1,
                                     const ArrayGeometry& geom,
                                     const std::optional<DisplacementPrior>& prior,
                                     const Eigen::Matrix3d& r_noise) {
  check_scan(scan_t, geom, "scan_t");
  check_scan(scan_t1, geom, "scan_t1");
  const int n = geom.size();

  const Eigen::Matrix3d r_inv = r_noise.inverse();
  Eigen::Matrix<double, 6, 6> prior_info = Eigen::Matrix<double, 6, 6>::Zero();
  if (prior) prior_info = prior->cov.inverse();

  // State: dr, eps (tangent at the prior-mean rotation), w.
  Eigen::Vector3d dr = prior ? prior->dr_mean_m : Eigen::Vector3d::Zero();
  UnitOrientation dq = prior ? prior->dq_mean : UnitOrientation();
  Eigen::Matrix<double, 3, 1> eps_total = Eigen::Vector3d::Zero();
  Eigen::Matrix<double, 8, 1> w = Eigen::Matrix<double, 8, 1>::Zero();

  // Initialize the map from the first scan (pose t is the map frame).
  {
    Eigen::MatrixXd h(3 * n, 8);
    Eigen::VectorXd y(3 * n);
    const UnitOrientation identity;
    const BasisSpec local(
        Box{Eigen::Vector3d::Constant(-1e9), Eigen::Vector3d::Constant(1e9)},
        PolynomialCdfParams{});
    for (int i = 0; i < n; ++i) {
      h.middleRows<3>(3 * i) =
          regressor(local, MeasurementKind::kVectorField, geom.offsets_m[i], identity);
      y.segment<3>(3 * i) = scan_t[i].value;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(h);
    qr.setThreshold(1e-10);
    if (qr.rank() < 8) {
      throw RankDeficient("array geometry does not identify the local map");
    }
    w = qr.solve(y);
  }

  Mat14 info = Mat14::Zero();
  int iter = 0;
  for (; iter < 50; ++iter) {
    info.setZero();
    Vec14 rhs = Vec14::Zero();

    const Eigen::Matrix3d r_dq = dq.rotation_matrix();
    for (int i = 0; i < n; ++i) {
      // Scan at t: pose is the identity; only the map enters.
      Eigen::Matrix<double, 3, 14> j1 = Eigen::Matrix<double, 3, 14>::Zero();
      const Eigen::Vector3d d_i = geom.offsets_m[i];
      j1.block<3, 3>(0, 6).setIdentity();
      j1.block<3, 5>(0, 9) = gradient_action(d_i);
      const Eigen::Vector3d e1 =
          scan_t[i].value - (w.head<3>() + gradient_from_params(w.tail<5>()) * d_i);
      info += j1.transpose() * r_inv * j1;
      rhs += j1.transpose() * r_inv * e1;

      // Scan at t+1: full pose coupling.
      const Scan2Jacobian sj = scan2_jacobian(dr, r_dq, w, d_i);
      Eigen::Matrix<double, 3, 14> j2;
      j2.block<3, 3>(0, 0) = sj.d_dr;
      j2.block<3, 3>(0, 3) = sj.d_eps;
      j2.block<3, 8>(0, 6) = sj.d_w;
      const Eigen::Vector3d e2 = scan_t1[i].value - predict_scan2(dr, r_dq, w, d_i);
      info += j2.transpose() * r_inv * j2;
      rhs += j2.transpose() * r_inv * e2;
    }

    if (prior) {
      Eigen::Matrix<double, 6, 1> e_prior;
      e_prior.head<3>() = prior->dr_mean_m - dr;
      e_prior.tail<3>() = -eps_total;
      info.topLeftCorner<6, 6>() += prior_info;
      rhs.head<6>() += prior_info * e_prior;
    }

    Eigen::LDLT<Mat14> ldlt(info);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
      throw RankDeficient("displacement problem not identifiable");
    }
    const Vec14 step = ldlt.solve(rhs);
    dr += step.head<3>();
    dq = boxplus(dq, step.segment<3>(3));
    eps_total += step.segment<3>(3);
    w += step.tail<8>();
    if (step.norm() < 1e-10) break;
  }
  if (iter == 50) throw NotConverged("Gauss-Newton did not converge in 50 iterations");

  DisplacementEstimate est;
  est.dr_m = dr;
  est.dq = dq;
  est.map.w = w;
  est.covariance = info.inverse();
  est.map.p = est.covariance.bottomRightCorner<8, 8>();
  est.iterations = iter + 1;
  return est;
}

DisplacementCrlb crlb_displacement(const ArrayGeometry& geom,
                                   const Eigen::Matrix3d& g_true,
                                   const Eigen::Matrix3d& r_noise,
                                   const std::optional<DisplacementPrior>& prior,
                                   const Eigen::Vector3d& b0_true) {
  if ((g_true - g_true.transpose()).norm() > 1e-12 * (1.0 + g_true.norm()) ||
      std::abs(g_true.trace()) > 1e-12 * (1.0 + g_true.norm())) {
    throw ValidationError("true gradient must be symmetric and traceless");
  }
  Eigen::Matrix<double, 8, 1> w;
  w.head<3>() = b0_true;
  w.tail<5>() = params_from_gradient(g_true);

  const Eigen::Matrix3d r_inv = r_noise.inverse();
  const Eigen::Matrix3d r_dq = Eigen::Matrix3d::Identity();
  Mat14 info = Mat14::Zero();
  for (const auto& d_i : geom.offsets_m) {
    Eigen::Matrix<double, 3, 14> j1 = Eigen::Matrix<double, 3, 14>::Zero();
    j1.block<3, 3>(0, 6).setIdentity();
    j1.block<3, 5>(0, 9) = gradient_action(d_i);
    info += j1.transpose() * r_inv * j1;

    const Scan2Jacobian sj = scan2_jacobian(Eigen::Vector3d::Zero(), r_dq, w, d_i);
    Eigen::Matrix<double, 3, 14> j2;
    j2.block<3, 3>(0, 0) = sj.d_dr;
    j2.block<3, 3>(0, 3) = sj.d_eps;
    j2.block<3, 8>(0, 6) = sj.d_w;
    info += j2.transpose() * r_inv * j2;
  }
  if (prior) info.topLeftCorner<6, 6>() += prior->cov.inverse();

  DisplacementCrlb out;
  Eigen::SelfAdjointEigenSolver<Mat14> es(info);
  const double tol = 1e-12 * std::max(es.eigenvalues().maxCoeff(), 1.0);
  if (es.eigenvalues().minCoeff() <= tol) {
    out.unbounded = true;
    for (int i = 0; i < 14; ++i) {
      if (es.eigenvalues()[i] <= tol) {
        const Eigen::Matrix<double, 6, 1> pose_dir = es.eigenvectors().col(i).head<6>();
        if (pose_dir.norm() > 1e-9) {
          out.unbounded_directions.push_back(pose_dir.normalized());
        }
      }
    }
    out.pose_cov.setConstant(std::numeric_limits<double>::infinity());
    return out;
  }
  out.pose_cov = info.inverse().topLeftCorner<6, 6>();
  return out;
}

DeadReckonState dead_reckon_init(const NavState& x0,
                                 const Eigen::Matrix<double, 6, 6>& pose_cov,
                                 const Eigen::Matrix<double, 8, 1>& w0,
                                 const Eigen::Matrix<double, 8, 8>& map_cov) {
  DeadReckonState s;
  s.x = x0;
  s.w = w0;
  s.p.topLeftCorner<6, 6>() = pose_cov;
  s.p.bottomRightCorner<8, 8>() = map_cov;
  return s;
}

DeadReckonState dead_reckon_step(const DeadReckonState& s, const OdometryInput& u,
                                 const std::vector<FieldSample>& samples,
                                 const ArrayGeometry& geom,
                                 const Eigen::Matrix3d& r_noise,
                                 const DeadReckonConfig& cfg) {
  check_scan(samples, geom, "samples");
  const int n = geom.size();

  DeadReckonState out = s;

  // --- Time update: nominal pose, rigid map transport, joint covariance.
  const Eigen::Matrix3d r_att = s.x.q.rotation_matrix();
  const Eigen::Vector3d dr_body = u.v_body_mps * u.dt_s;
  const UnitOrientation dq_inc = exp_map(u.omega_body_rps * u.dt_s);
  const Eigen::Matrix3d r_inc = dq_inc.rotation_matrix();

  out.x = propagate(s.x, u);

  const Eigen::Vector3d b0 = s.w.head<3>();
  const Eigen::Matrix3d g = gradient_from_params(s.w.tail<5>());
  const Eigen::Vector3d b0_next = r_inc.transpose() * (b0 + g * dr_body);
  const Eigen::Matrix3d g_next = r_inc.transpose() * g * r_inc;
  out.w.head<3>() = b0_next;
  out.w.tail<5>() = params_from_gradient(g_next);

  Mat14 f = Mat14::Identity();
  f.block<3, 3>(0, 3) = -r_att * skew(u.v_body_mps * u.dt_s);
  f.block<3, 3>(3, 3) = r_inc.transpose();
  f.block<3, 3>(6, 6) = r_inc.transpose();
  f.block<3, 5>(6, 9) = r_inc.transpose() * gradient_action(dr_body);
  f.block<5, 5>(9, 9) = gradient_conjugation(r_inc);

  // Odometry noise enters the pose directly and the transported map through
  // the body displacement and rotation increment.
  Eigen::Matrix<double, 14, 6> l = Eigen::Matrix<double, 14, 6>::Zero();
  l.block<3, 3>(0, 0).setIdentity();
  l.block<3, 3>(3, 3).setIdentity();
  l.block<3, 3>(6, 0) = r_inc.transpose() * g * r_att.transpose();
  l.block<3, 3>(6, 3) = skew(b0_next);
  l.block<5, 3>(9, 3) = gradient_rotation_sensitivity(g_next);

  const double dist = dr_body.norm();
  Eigen::Matrix<double, 8, 1> q_map_diag;
  q_map_diag.head<3>().setConstant(std::pow(cfg.b0_walk_per_m * b0.norm() * dist, 2));
  q_map_diag.tail<5>().setConstant(std::pow(cfg.g_walk_per_m * g.norm() * dist, 2));

  Mat14 p = f * s.p * f.transpose() + l * u.noise_cov * l.transpose();
  p.bottomRightCorner<8, 8>() += q_map_diag.asDiagonal();

  // --- Measurement update: stacked array scan, linear in the local map.
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 14);
  Eigen::VectorXd nu(3 * n);
  const Eigen::Matrix3d g_pred = gradient_from_params(out.w.tail<5>());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d d_i = geom.offsets_m[i];
    h.block<3, 3>(3 * i, 6).setIdentity();
    h.block<3, 5>(3 * i, 9) = gradient_action(d_i);
    nu.segment<3>(3 * i) = samples[i].value - (out.w.head<3>() + g_pred * d_i);
  }
  Eigen::MatrixXd s_innov = h * p * h.transpose();
  for (int i = 0; i < n; ++i) s_innov.block<3, 3>(3 * i, 3 * i) += r_noise;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(s_innov);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    throw SingularInnovation("array innovation covariance not invertible");
  }
  const Eigen::MatrixXd k = ldlt.solve(h * p).transpose();
  const Vec14 delta = k * nu;

  out.x.r_m += delta.head<3>();
  out.x.q = boxplus(out.x.q, delta.segment<3>(3));
  out.w += delta.tail<8>();

  const Mat14 ikh = Mat14::Identity() - k * h;
  Eigen::MatrixXd kr = Eigen::MatrixXd::Zero(14, 14);
  for (int i = 0; i < n; ++i) {
    kr += k.middleCols<3>(3 * i) * r_noise * k.middleCols<3>(3 * i).transpose();
  }
  p = ikh * p * ikh.transpose() + kr;
  out.p = 0.5 * (p + p.transpose());

  // Innovation consistency gate.
  out.last_nis_per_dof = nu.dot(ldlt.solve(nu)) / static_cast<double>(3 * n);
  out.gate_streak = out.last_nis_per_dof > cfg.nees_gate ? s.gate_streak + 1 : 0;
  if (out.gate_streak >= cfg.gate_count) out.diverged = true;
  return out;
}

}  // namespace magnav
