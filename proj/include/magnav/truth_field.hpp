#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "magnav/errors.hpp"

namespace magnav {

// mu0 / (4 pi), exactly, T*m/A.
inline constexpr double kMu0Over4Pi = 1e-7;

struct DipoleSource {
  Eigen::Vector3d position_m = Eigen::Vector3d::Zero();
  Eigen::Vector3d moment_am2 = Eigen::Vector3d::Zero();
};

// Spatially uniform sinusoidal disturbance, B(t) = amplitude*sin(2 pi t/period)*direction.
struct TemporalDisturbance {
  double amplitude_t = 0.0;
  double period_s = 1.0;
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
};

// Analytic ground-truth field: uniform background plus a sum of point
// dipoles. Evaluation throws SourceTooClose inside the exclusion radius of
// any source. Immutable after construction; evaluation is pure.
class TruthField {
public:
  TruthField() = default;
  TruthField(Eigen::Vector3d background_t, std::vector<DipoleSource> sources,
             std::optional<TemporalDisturbance> temporal = std::nullopt,
             double exclusion_radius_m = 0.05);

  Eigen::Vector3d eval_field(const Eigen::Vector3d& r_m, double t_s = 0.0) const;

  // Spatial Jacobian dB/dr, symmetric and traceless away from sources.
  Eigen::Matrix3d eval_jacobian(const Eigen::Vector3d& r_m, double t_s = 0.0) const;

  // Scalar potential with -grad(phi) = eval_field (static part only).
  double eval_potential(const Eigen::Vector3d& r_m) const;

  const Eigen::Vector3d& background_t() const { return background_; }
  const std::vector<DipoleSource>& sources() const { return sources_; }
  const std::optional<TemporalDisturbance>& temporal() const { return temporal_; }
  double exclusion_radius_m() const { return exclusion_radius_; }

private:
  void check_distance(const Eigen::Vector3d& r_m) const;

  Eigen::Vector3d background_ = Eigen::Vector3d::Zero();
  std::vector<DipoleSource> sources_;
  std::optional<TemporalDisturbance> temporal_;
  double exclusion_radius_ = 0.05;
};

}  // namespace magnav
