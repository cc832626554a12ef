#include "magnav/particle_filter.hpp"

#include <cmath>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace magnav {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double gaussian_log_density(const Eigen::VectorXd& resid, const Eigen::MatrixXd& cov) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 0.0) {
    throw SingularInnovation("measurement covariance not positive definite");
  }
  const double quad = resid.dot(ldlt.solve(resid));
  return -0.5 * (resid.size() * kLog2Pi + d.array().log().sum() + quad);
}
}  // namespace

void ParticleSet::normalize() {
  double max_lw = -std::numeric_limits<double>::infinity();
  for (const auto& p : particles) max_lw = std::max(max_lw, p.log_weight);
  if (!std::isfinite(max_lw)) {
    throw AllParticlesDegenerate("all particle log-weights are -inf");
  }
  double sum = 0.0;
  for (const auto& p : particles) sum += std::exp(p.log_weight - max_lw);
  const double lse = max_lw + std::log(sum);
  for (auto& p : particles) p.log_weight -= lse;
}

double ParticleSet::ess() const {
  double sum_sq = 0.0;
  for (const auto& p : particles) {
    const double w = std::exp(p.log_weight);
    sum_sq += w * w;
  }
  return 1.0 / sum_sq;
}

Eigen::Vector3d ParticleSet::weighted_mean_position() const {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : particles) mean += std::exp(p.log_weight) * p.state.r_m;
  return mean;
}

Eigen::Matrix3d ParticleSet::position_covariance() const {
  const Eigen::Vector3d mean = weighted_mean_position();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : particles) {
    const Eigen::Vector3d d = p.state.r_m - mean;
    cov += std::exp(p.log_weight) * d * d.transpose();
  }
  return cov;
}

double mm_likelihood(const MapPosterior& mp, MeasurementKind kind,
                     const NavState& x, const FieldSample& y,
                     const Eigen::MatrixXd& r_noise, const double* floor_log) {
  try {
    const MapEvaluation ev = eval_map(mp, kind, x.r_m, x.q);
    return gaussian_log_density(y.vector_value() - ev.mean, ev.covariance + r_noise);
  } catch (const OutOfDomain&) {
    if (floor_log) return *floor_log;
    throw;
  }
}

std::vector<int> systematic_resample(const std::vector<double>& weights,
                                     double offset01) {
  const int n = static_cast<int>(weights.size());
  std::vector<int> ancestors(n);
  double cumulative = weights[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double u = (i + offset01) / n;
    while (u > cumulative && j < n - 1) cumulative += weights[++j];
    ancestors[i] = j;
  }
  return ancestors;
}

namespace {

// Sum of per-sample log-likelihoods at a particle pose; the per-sensor
// world position honors the array geometry. floor_hits counts out-of-domain
// samples that fell back to the likelihood floor.
double weight_against_map(const MapPosterior& map, const NavState& state,
                          const std::vector<FieldSample>& samples,
                          const std::optional<ArrayGeometry>& geom,
                          const Eigen::MatrixXd& r_noise, const FilterConfig& cfg,
                          int& floor_hits) {
  double lw = 0.0;
  for (const auto& sample : samples) {
    NavState at = state;
    if (geom) {
      at.r_m += rotate(state.q, geom->offsets_m.at(sample.sensor_id));
    }
    const MeasurementKind branch = branch_for(map.spec, sample.kind);
    try {
      lw += mm_likelihood(map, branch, at, sample, r_noise, nullptr);
    } catch (const OutOfDomain&) {
      lw += cfg.log_likelihood_floor;
      ++floor_hits;
    }
  }
  return lw;
}

void absorb_into_map(MapPosterior& map, const NavState& state,
                     const std::vector<FieldSample>& samples,
                     const std::optional<ArrayGeometry>& geom,
                     const Eigen::MatrixXd& r_noise) {
  for (const auto& sample : samples) {
    LearningRecord rec;
    rec.r = state.r_m;
    if (geom) rec.r += rotate(state.q, geom->offsets_m.at(sample.sensor_id));
    rec.q = state.q;
    rec.y = sample.vector_value();
    rec.R = r_noise;
    rec.kind = sample.kind;
    try {
      map = rls_update(map, rec);
    } catch (const OutOfDomain&) {
      // Outside the map domain nothing can be learned; the weight floor
      // already penalized the particle.
    }
  }
}

// Runs the per-particle work either serially (the testing reference) or via
// OpenMP. Particles are independent and own their random streams, so both
// paths produce bit-identical results. Exceptions from worker iterations are
// captured and rethrown after the join.
template <typename PerParticle>
void run_kernel(std::vector<Particle>& particles, bool parallel, PerParticle&& fn) {
  const int n = static_cast<int>(particles.size());
  if (!parallel) {
    for (int i = 0; i < n; ++i) fn(particles[i], i);
    return;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      fn(particles[i], i);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

ParticleSet particle_step(const ParticleSet& ps, const MapPosterior* shared_map,
                          const OdometryInput& u,
                          const std::vector<FieldSample>& samples,
                          const std::optional<ArrayGeometry>& geom,
                          const Eigen::MatrixXd& r_noise, const FilterConfig& cfg,
                          std::uint64_t step_index, bool slam) {
  if (ps.particles.empty()) throw ValidationError("empty particle set");
  const Eigen::Matrix<double, 6, 6> noise_chol = psd_cholesky(u.noise_cov);
  const int n = ps.size();

  ParticleSet out = ps;
  std::vector<int> floor_hits(n, 0);

  run_kernel(out.particles, cfg.parallel, [&](Particle& p, int i) {
    Rng rng = Rng::stream(cfg.seed, step_index, static_cast<std::uint64_t>(i));
    p.state = propagate(p.state, u, noise_chol, rng);
    const MapPosterior& map = slam ? *p.map : *shared_map;
    p.log_weight +=
        weight_against_map(map, p.state, samples, geom, r_noise, cfg, floor_hits[i]);
    if (slam) absorb_into_map(*p.map, p.state, samples, geom, r_noise);
  });

  bool any_in_domain = samples.empty();
  for (int hits : floor_hits) {
    if (hits < static_cast<int>(samples.size())) any_in_domain = true;
  }
  if (!any_in_domain) {
    throw AllParticlesDegenerate("every particle hit the likelihood floor");
  }

  out.normalize();
  if (out.ess() < cfg.ess_threshold * n) {
    std::vector<double> weights(n);
    for (int i = 0; i < n; ++i) weights[i] = std::exp(out.particles[i].log_weight);
    Rng rng = Rng::stream(cfg.seed, step_index, 0x726573616d706cULL);  // resample stream
    const std::vector<int> ancestors = systematic_resample(weights, rng.uniform());
    std::vector<Particle> resampled;
    resampled.reserve(n);
    const double uniform_lw = -std::log(static_cast<double>(n));
    for (int i = 0; i < n; ++i) {
      resampled.push_back(out.particles[ancestors[i]]);  // deep copy incl. map
      resampled.back().log_weight = uniform_lw;
    }
    out.particles = std::move(resampled);
  }
  return out;
}

}  // namespace

ParticleSet map_match_step(const ParticleSet& ps, const MapPosterior& map,
                           const OdometryInput& u,
                           const std::vector<FieldSample>& samples,
                           const std::optional<ArrayGeometry>& geom,
                           const Eigen::MatrixXd& r_noise,
                           const FilterConfig& cfg, std::uint64_t step_index) {
  for (const auto& p : ps.particles) {
    if (p.map) throw ValidationError("map matching uses one shared map");
  }
  return particle_step(ps, &map, u, samples, geom, r_noise, cfg, step_index, false);
}

ParticleSet slam_step(const ParticleSet& ps, const OdometryInput& u,
                      const std::vector<FieldSample>& samples,
                      const std::optional<ArrayGeometry>& geom,
                      const Eigen::MatrixXd& r_noise, const FilterConfig& cfg,
                      std::uint64_t step_index) {
  for (const auto& p : ps.particles) {
    if (!p.map) throw ValidationError("every SLAM particle needs a map");
  }
  return particle_step(ps, nullptr, u, samples, geom, r_noise, cfg, step_index, true);
}

}  // namespace magnav
