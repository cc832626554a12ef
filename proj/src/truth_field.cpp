#include "magnav/truth_field.hpp"

#include <cmath>

namespace magnav {

namespace {
constexpr double kTwoPi = 6.283185307179586476925;
}

TruthField::TruthField(Eigen::Vector3d background_t,
                       std::vector<DipoleSource> sources,
                       std::optional<TemporalDisturbance> temporal,
                       double exclusion_radius_m)
    : background_(std::move(background_t)),
      sources_(std::move(sources)),
      temporal_(std::move(temporal)),
      exclusion_radius_(exclusion_radius_m) {
  for (const auto& s : sources_) {
    if (!s.moment_am2.allFinite() || s.moment_am2.isZero(0.0)) {
      throw ValidationError("dipole moment must be finite and nonzero");
    }
  }
  if (temporal_) temporal_->direction.normalize();
}

void TruthField::check_distance(const Eigen::Vector3d& r_m) const {
  for (const auto& s : sources_) {
    if ((r_m - s.position_m).norm() < exclusion_radius_) {
      throw SourceTooClose("evaluation point within exclusion radius of a dipole");
    }
  }
}

Eigen::Vector3d TruthField::eval_field(const Eigen::Vector3d& r_m, double t_s) const {
  check_distance(r_m);
  Eigen::Vector3d b = background_;
  for (const auto& s : sources_) {
    const Eigen::Vector3d d = r_m - s.position_m;
    const double dist = d.norm();
    const Eigen::Vector3d dhat = d / dist;
    b += kMu0Over4Pi * (3.0 * dhat * dhat.dot(s.moment_am2) - s.moment_am2) /
         (dist * dist * dist);
  }
  if (temporal_) {
    b += temporal_->amplitude_t * std::sin(kTwoPi * t_s / temporal_->period_s) *
         temporal_->direction;
  }
  return b;
}

Eigen::Matrix3d TruthField::eval_jacobian(const Eigen::Vector3d& r_m, double t_s) const {
  (void)t_s;  // temporal term is spatially uniform
  check_distance(r_m);
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  for (const auto& s : sources_) {
    const Eigen::Vector3d d = r_m - s.position_m;
    const double dist = d.norm();
    const Eigen::Vector3d dhat = d / dist;
    const Eigen::Vector3d& m = s.moment_am2;
    const double md = d.dot(m);
    const double inv5 = 1.0 / std::pow(dist, 5);
    j += 3.0 * kMu0Over4Pi * inv5 *
         (md * Eigen::Matrix3d::Identity() + d * m.transpose() +
          m * d.transpose() - 5.0 * md * dhat * dhat.transpose());
  }
  return j;
}

double TruthField::eval_potential(const Eigen::Vector3d& r_m) const {
  if (temporal_ && temporal_->amplitude_t != 0.0) {
    throw ValidationError("potential undefined with temporal disturbance enabled");
  }
  check_distance(r_m);
  double phi = -background_.dot(r_m);
  for (const auto& s : sources_) {
    const Eigen::Vector3d d = r_m - s.position_m;
    const double dist = d.norm();
    phi += kMu0Over4Pi * s.moment_am2.dot(d) / (dist * dist * dist);
  }
  return phi;
}

}  // namespace magnav
