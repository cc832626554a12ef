#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "magnav/map_learning.hpp"
#include "magnav/map_model.hpp"
#include "magnav/nav_state.hpp"
#include "magnav/sensors.hpp"

namespace magnav {

struct Particle {
  NavState state;
  double log_weight = 0.0;
  std::optional<MapPosterior> map;  // SLAM only
};

struct ParticleSet {
  std::vector<Particle> particles;

  int size() const { return static_cast<int>(particles.size()); }
  // Normalizes log-weights in place (log-sum-exp); throws when degenerate.
  void normalize();
  // Effective sample size of the normalized weights.
  double ess() const;
  Eigen::Vector3d weighted_mean_position() const;
  Eigen::Matrix3d position_covariance() const;
};

struct FilterConfig {
  double ess_threshold = 0.5;               // resample when ess < threshold * N
  double log_likelihood_floor = -27.631021115928547;  // log(1e-12)
  std::uint64_t seed = 0;
  bool parallel = true;  // OpenMP path; serial path is the testing reference
};

// Marginalized measurement log-likelihood log N(y; H mu, H P H^T + R). When
// the pose leaves the map domain, returns *floor when provided, otherwise
// rethrows OutOfDomain.
double mm_likelihood(const MapPosterior& mp, MeasurementKind kind,
                     const NavState& x, const FieldSample& y,
                     const Eigen::MatrixXd& r_noise,
                     const double* floor_log = nullptr);

// One map-matching step against a shared fixed map: propagate with noise,
// reweight by the marginalized likelihood, normalize, resample on low ESS.
// step_index seeds the per-particle noise streams.
ParticleSet map_match_step(const ParticleSet& ps, const MapPosterior& map,
                           const OdometryInput& u,
                           const std::vector<FieldSample>& samples,
                           const std::optional<ArrayGeometry>& geom,
                           const Eigen::MatrixXd& r_noise,
                           const FilterConfig& cfg, std::uint64_t step_index);

// One Rao-Blackwellized SLAM step: as map_match_step, but every particle is
// weighted against and then updates its own map; maps deep-copy on resample.
ParticleSet slam_step(const ParticleSet& ps, const OdometryInput& u,
                      const std::vector<FieldSample>& samples,
                      const std::optional<ArrayGeometry>& geom,
                      const Eigen::MatrixXd& r_noise, const FilterConfig& cfg,
                      std::uint64_t step_index);

// Systematic resampling: N equally spaced points with one common uniform
// offset; returns the selected ancestor index per slot.
std::vector<int> systematic_resample(const std::vector<double>& weights,
                                     double offset01);

}  // namespace magnav
