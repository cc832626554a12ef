#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "magnav/geometry.hpp"
#include "magnav/map_model.hpp"
#include "magnav/truth_field.hpp"

namespace magnav {

// Affine magnetometer model y = A h + b + e (vector kinds); magnitude
// sensors read ||B|| + e. noise_std is per component.
struct SensorModel {
  MeasurementKind kind = MeasurementKind::kVectorField;
  double noise_std_t = 0.0;
  Eigen::Matrix3d affine_a = Eigen::Matrix3d::Identity();
  Eigen::Vector3d offset_b_t = Eigen::Vector3d::Zero();
};

// Rigid magnetometer array; offsets in the sensor frame.
struct ArrayGeometry {
  std::vector<Eigen::Vector3d> offsets_m;

  int size() const { return static_cast<int>(offsets_m.size()); }
  // True when all offsets lie within 1e-9 m of a common plane.
  bool planar() const;
};

struct FieldSample {
  double t_s = 0.0;
  int sensor_id = 0;
  MeasurementKind kind = MeasurementKind::kVectorField;
  // Vector reading, or magnitude in value[0] with the rest zero.
  Eigen::Vector3d value = Eigen::Vector3d::Zero();

  Eigen::VectorXd vector_value() const {
    if (kind == MeasurementKind::kMagnitude) {
      return value.head<1>();
    }
    return value;
  }
};

// Samples every array sensor (or a single sensor at the body origin when no
// geometry is given) through the affine model. Noise streams derive from
// (rng_seed, t, sensor_id), so results are reproducible under any call order.
std::vector<FieldSample> synthesize(const TruthField& field,
                                    const Eigen::Vector3d& r_m,
                                    const UnitOrientation& q,
                                    const SensorModel& sm,
                                    const std::optional<ArrayGeometry>& geom,
                                    double t_s, std::uint64_t rng_seed);

struct CalibrationResult {
  Eigen::Matrix3d a_hat;   // symmetric positive definite
  Eigen::Vector3d b_hat;
  double residual;         // std/mean of calibrated norms
};

// Algebraic ellipsoid fit of vector samples taken in a locally constant
// field under diverse orientations. Soft-iron rotation ambiguity is resolved
// by the symmetric square root; the gain scale is fixed so calibrated norms
// equal reference_norm (or 1 when unspecified, since the norm constraint
// cannot observe absolute scale).
CalibrationResult ellipsoid_calibrate(const std::vector<FieldSample>& samples,
                                      std::optional<double> reference_norm = std::nullopt);

struct JacobianEstimate {
  Eigen::Vector3d b0_t;
  Eigen::Matrix3d g_tpm;                  // symmetric, traceless
  Eigen::Matrix<double, 8, 8> covariance; // over [b0; g-params]
};

// Weighted least squares of the 8-parameter first-order curl/divergence-free
// model over one simultaneous array scan; all quantities in the sensor frame.
JacobianEstimate estimate_jacobian(const std::vector<FieldSample>& samples,
                                   const ArrayGeometry& geom,
                                   const Eigen::Matrix3d& r_noise);

}  // namespace magnav
