#include "magnav/sensors.hpp"

#include <cmath>

#include "magnav/rng.hpp"

namespace magnav {

bool ArrayGeometry::planar() const {
  const int n = size();
  if (n < 3) return true;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& d : offsets_m) centroid += d;
  centroid /= n;
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& d : offsets_m) {
    const Eigen::Vector3d c = d - centroid;
    scatter += c * c.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
  // Smallest principal extent below 1e-9 m (rms).
  return std::sqrt(std::max(es.eigenvalues()[0], 0.0) / n) < 1e-9;
}

std::vector<FieldSample> synthesize(const TruthField& field,
                                    const Eigen::Vector3d& r_m,
                                    const UnitOrientation& q,
                                    const SensorModel& sm,
                                    const std::optional<ArrayGeometry>& geom,
                                    double t_s, std::uint64_t rng_seed) {
  static const ArrayGeometry kSingle{{Eigen::Vector3d::Zero()}};
  const ArrayGeometry& g = geom ? *geom : kSingle;
  if (sm.noise_std_t < 0.0) throw ValidationError("noise std must be >= 0");

  std::vector<FieldSample> out;
  out.reserve(g.offsets_m.size());
  const Eigen::Matrix3d c_ms = q.rotation_matrix();  // sensor -> map
  for (int n = 0; n < g.size(); ++n) {
    const Eigen::Vector3d world = r_m + c_ms * g.offsets_m[n];
    const Eigen::Vector3d b_true = field.eval_field(world, t_s);
    Rng rng = Rng::stream(rng_seed, Rng::hash_double(t_s), static_cast<std::uint64_t>(n));
    FieldSample s;
    s.t_s = t_s;
    s.sensor_id = n;
    s.kind = sm.kind;
    if (sm.kind == MeasurementKind::kMagnitude) {
      s.value[0] = b_true.norm() + sm.noise_std_t * rng.normal();
    } else {
      Eigen::Vector3d noise;
      for (int i = 0; i < 3; ++i) noise[i] = sm.noise_std_t * rng.normal();
      s.value = sm.affine_a * (c_ms.transpose() * b_true) + sm.offset_b_t + noise;
    }
    out.push_back(std::move(s));
  }
  return out;
}

CalibrationResult ellipsoid_calibrate(const std::vector<FieldSample>& samples,
                                      std::optional<double> reference_norm) {
  if (samples.size() < 20) {
    throw ValidationError("ellipsoid fit needs at least 20 samples");
  }
  const int n = static_cast<int>(samples.size());

  // Quadric v^T Q v + 2 u^T v + k = 0; theta = [Qxx Qyy Qzz Qxy Qxz Qyz u k].
  // Columns scaled by the rms sample magnitude for conditioning.
  double scale = 0.0;
  for (const auto& s : samples) scale += s.value.squaredNorm();
  scale = std::sqrt(scale / n);
  if (!(scale > 0.0)) throw DegenerateFit("all-zero samples");

  Eigen::MatrixXd design(n, 10);
  for (int i = 0; i < n; ++i) {
    if (samples[i].kind == MeasurementKind::kMagnitude) {
      throw KindMismatch("ellipsoid calibration needs vector samples");
    }
    const Eigen::Vector3d v = samples[i].value / scale;
    design.row(i) << v.x() * v.x(), v.y() * v.y(), v.z() * v.z(),
        2.0 * v.x() * v.y(), 2.0 * v.x() * v.z(), 2.0 * v.y() * v.z(),
        2.0 * v.x(), 2.0 * v.y(), 2.0 * v.z(), 1.0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  // The smallest singular value is the fitted quadric itself (zero on exact
  // data); degeneracy means the next one also collapses, i.e. more than one
  // quadric family fits the samples.
  if (sv[0] / std::max(sv[8], 1e-300) > 1e10) {
    throw DegenerateFit("insufficient orientation excitation");
  }
  Eigen::VectorXd theta = svd.matrixV().col(9);

  Eigen::Matrix3d qm;
  qm << theta[0], theta[3], theta[4],
        theta[3], theta[1], theta[5],
        theta[4], theta[5], theta[2];
  if (qm.trace() < 0.0) {
    theta = -theta;
    qm = -qm;
  }
  const Eigen::Vector3d u = theta.segment<3>(6);
  const double k = theta[9];

  Eigen::LDLT<Eigen::Matrix3d> qldlt(qm);
  if (qldlt.info() != Eigen::Success || qldlt.vectorD().minCoeff() <= 0.0) {
    throw DegenerateFit("fitted quadric is not an ellipsoid");
  }
  const Eigen::Vector3d center = -qldlt.solve(u);
  const double k_prime = center.dot(qm * center) - k;  // (v-c)^T Q (v-c) = k'
  if (!(k_prime > 0.0)) throw DegenerateFit("fitted quadric is not an ellipsoid");
  const Eigen::Matrix3d n_mat = qm / k_prime;  // (v-c)^T N (v-c) = 1

  // Symmetric square root of N^-1: calibrated z = A^-1 (y - b) has unit norm.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(n_mat);
  const Eigen::Vector3d inv_sqrt = es.eigenvalues().cwiseInverse().cwiseSqrt();
  Eigen::Matrix3d a_hat =
      es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();

  // Undo the column scaling, then fix the gain scale.
  Eigen::Vector3d b_hat = center * scale;
  a_hat *= scale;
  if (reference_norm) {
    if (!(*reference_norm > 0.0)) throw ValidationError("reference norm must be positive");
    a_hat /= *reference_norm;
  }

  double mean = 0.0, mean_sq = 0.0;
  const Eigen::Matrix3d a_inv = a_hat.inverse();
  for (const auto& s : samples) {
    const double norm = (a_inv * (s.value - b_hat)).norm();
    mean += norm;
    mean_sq += norm * norm;
  }
  mean /= n;
  mean_sq /= n;
  const double spread = std::sqrt(std::max(mean_sq - mean * mean, 0.0)) / mean;
  return CalibrationResult{a_hat, b_hat, spread};
}

JacobianEstimate estimate_jacobian(const std::vector<FieldSample>& samples,
                                   const ArrayGeometry& geom,
                                   const Eigen::Matrix3d& r_noise) {
  const int n = geom.size();
  if (static_cast<int>(samples.size()) != n || n < 2) {
    throw ValidationError("need one vector sample per array sensor");
  }
  for (const auto& s : samples) {
    if (s.kind == MeasurementKind::kMagnitude) {
      throw KindMismatch("jacobian estimation needs vector samples");
    }
    if (s.t_s != samples.front().t_s) {
      throw TimestampMismatch("array samples must share one timestamp");
    }
  }

  Eigen::LLT<Eigen::Matrix3d> rchol(r_noise);
  if (rchol.info() != Eigen::Success) {
    throw ValidationError("measurement noise covariance must be positive definite");
  }

  const UnitOrientation identity;
  const BasisSpec local(Box{Eigen::Vector3d::Constant(-1e9), Eigen::Vector3d::Constant(1e9)},
                        PolynomialCdfParams{Eigen::Vector3d::Zero()});
  Eigen::MatrixXd hw(3 * n, 8);
  Eigen::VectorXd yw(3 * n);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd h =
        regressor(local, MeasurementKind::kVectorField, geom.offsets_m[i], identity);
    hw.middleRows<3>(3 * i) = rchol.matrixL().solve(h);
    yw.segment<3>(3 * i) = rchol.matrixL().solve(samples[i].value);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(hw);
  qr.setThreshold(1e-10);
  if (qr.rank() < 8) {
    throw RankDeficient("array geometry does not identify the 8 local-map parameters");
  }
  const Eigen::Matrix<double, 8, 1> w = qr.solve(yw);
  const Eigen::Matrix<double, 8, 8> info = hw.transpose() * hw;

  JacobianEstimate est;
  est.b0_t = w.head<3>();
  est.g_tpm = gradient_from_params(w.tail<5>());
  est.covariance = info.inverse();
  return est;
}

}  // namespace magnav
