#include "magnav/harness.hpp"

#include <chrono>
#include <cmath>

#include "magnav/map_io.hpp"

namespace magnav {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;      // particle init
constexpr std::uint64_t kOdoStream = 0x6f646f;         // odometry noise
constexpr std::uint64_t kReferenceStream = 0x726566;   // reference sensor

UnitOrientation yaw_orientation(double yaw) {
  return exp_map(Eigen::Vector3d(0.0, 0.0, yaw));
}

struct PathSampler {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> cumulative;  // arc length at each point

  explicit PathSampler(const std::vector<Eigen::Vector3d>& pts) : points(pts) {
    cumulative.push_back(0.0);
    for (std::size_t i = 1; i < points.size(); ++i) {
      cumulative.push_back(cumulative.back() + (points[i] - points[i - 1]).norm());
    }
  }

  double length() const { return cumulative.back(); }

  Eigen::Vector3d position(double s) const {
    if (s <= 0.0) return points.front();
    if (s >= length()) return points.back();
    std::size_t seg = 1;
    while (cumulative[seg] < s) ++seg;
    const double frac = (s - cumulative[seg - 1]) / (cumulative[seg] - cumulative[seg - 1]);
    return points[seg - 1] + frac * (points[seg] - points[seg - 1]);
  }

  Eigen::Vector3d direction(double s) const {
    std::size_t seg = 1;
    const double clamped = std::min(std::max(s, 0.0), length());
    while (seg < cumulative.size() - 1 && cumulative[seg] <= clamped) ++seg;
    return (points[seg] - points[seg - 1]).normalized();
  }
};

double yaw_of(const Eigen::Vector3d& dir, double fallback) {
  if (dir.head<2>().norm() < 1e-12) return fallback;
  return std::atan2(dir.y(), dir.x());
}

}  // namespace

std::vector<TruthRow> generate_truth(const Scenario& s) {
  const double dt = 1.0 / s.sensors.rate_hz;
  const auto& tc = s.trajectory;
  std::vector<TruthRow> rows;

  if (tc.type == TrajectoryConfig::Type::kCircle) {
    const double circumference = 2.0 * M_PI * tc.radius_m * tc.turns;
    const double travel_time = tc.speed_mps > 0.0 ? circumference / tc.speed_mps : 0.0;
    const double duration = tc.hold_s + travel_time;
    const int steps = static_cast<int>(std::floor(duration / dt + 1e-9));
    for (int i = 0; i <= steps; ++i) {
      const double t = i * dt;
      const double arc = std::max(t - tc.hold_s, 0.0) * tc.speed_mps;
      const double angle = arc / tc.radius_m;
      TruthRow row;
      row.t_s = t;
      row.state.r_m = tc.center_m + tc.radius_m * Eigen::Vector3d(std::cos(angle),
                                                                  std::sin(angle), 0.0);
      const double yaw = tc.fixed_yaw_rad.value_or(angle + M_PI / 2.0);
      row.state.q = yaw_orientation(yaw);
      rows.push_back(row);
    }
  } else {
    const PathSampler path(tc.points_m);
    const double travel_time =
        tc.speed_mps > 0.0 && path.length() > 0.0 ? path.length() / tc.speed_mps : 0.0;
    const double duration = tc.hold_s + travel_time;
    const int steps = static_cast<int>(std::floor(duration / dt + 1e-9));
    double last_yaw = tc.fixed_yaw_rad.value_or(
        path.length() > 0.0 ? yaw_of(path.direction(0.0), 0.0) : 0.0);
    for (int i = 0; i <= steps; ++i) {
      const double t = i * dt;
      const double arc = std::max(t - tc.hold_s, 0.0) * tc.speed_mps;
      TruthRow row;
      row.t_s = t;
      row.state.r_m = path.position(arc);
      if (!tc.fixed_yaw_rad && path.length() > 0.0) {
        last_yaw = yaw_of(path.direction(arc), last_yaw);
      }
      row.state.q = yaw_orientation(last_yaw);
      rows.push_back(row);
    }
  }

  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    rows[i].state.v_mps = (rows[i + 1].state.r_m - rows[i].state.r_m) / dt;
  }
  if (rows.size() > 1) rows.back().state.v_mps = rows[rows.size() - 2].state.v_mps;

  // Up-front validation: the trajectory (and every array sensor) must stay
  // clear of field sources for the whole run.
  for (const auto& row : rows) {
    try {
      const Eigen::Matrix3d c_ms = row.state.q.rotation_matrix();
      if (s.sensors.array) {
        for (const auto& d : s.sensors.array->offsets_m) {
          s.field.eval_field(row.state.r_m + c_ms * d, row.t_s);
        }
      } else {
        s.field.eval_field(row.state.r_m, row.t_s);
      }
    } catch (const SourceTooClose&) {
      throw ValidationError("trajectory passes inside a source exclusion radius at t=" +
                            std::to_string(row.t_s));
    }
  }
  return rows;
}

std::vector<OdometryRow> synthesize_odometry(const Scenario& s,
                                             const std::vector<TruthRow>& truth) {
  std::vector<OdometryRow> rows;
  const double dt = 1.0 / s.sensors.rate_hz;
  for (std::size_t i = 0; i + 1 < truth.size(); ++i) {
    const NavState& a = truth[i].state;
    const NavState& b = truth[i + 1].state;
    const Eigen::Vector3d delta = b.r_m - a.r_m;
    const Eigen::Vector3d v_body = rotate_inverse(a.q, delta) / dt;
    const Eigen::Vector3d omega = log_map(a.q.conjugate().compose(b.q)) / dt;

    const double pos_std =
        s.odometry.pos_noise_frac * delta.norm() + s.odometry.pos_noise_floor_m;
    const double ang_std = s.odometry.ang_noise_rad;

    Rng rng = Rng::stream(s.seed, kOdoStream, i);
    OdometryRow row;
    row.t_s = truth[i].t_s;
    row.u.dt_s = dt;
    row.u.v_body_mps = v_body;
    row.u.omega_body_rps = omega;
    for (int k = 0; k < 3; ++k) row.u.v_body_mps[k] += pos_std * rng.normal() / dt;
    for (int k = 0; k < 3; ++k) row.u.omega_body_rps[k] += ang_std * rng.normal() / dt;
    row.u.noise_cov.setZero();
    row.u.noise_cov.topLeftCorner<3, 3>() =
        pos_std * pos_std * Eigen::Matrix3d::Identity();
    row.u.noise_cov.bottomRightCorner<3, 3>() =
        ang_std * ang_std * Eigen::Matrix3d::Identity();
    rows.push_back(row);
  }
  return rows;
}

std::vector<FieldSample> synthesize_measurements(const Scenario& s,
                                                 const std::vector<TruthRow>& truth) {
  SensorModel sm{s.sensors.kind, s.sensors.noise_std_t, s.sensors.affine_a,
                 s.sensors.offset_b_t};
  const bool compensate = s.sensors.reference_position_m.has_value() &&
                          s.field.temporal().has_value();
  SensorModel ref_model{MeasurementKind::kVectorField, s.sensors.noise_std_t,
                        Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()};
  const std::uint64_t ref_seed = Rng::mix(s.seed, kReferenceStream);

  Eigen::Vector3d ref_baseline = Eigen::Vector3d::Zero();
  if (compensate) {
    ref_baseline = synthesize(s.field, *s.sensors.reference_position_m,
                              UnitOrientation(), ref_model, std::nullopt,
                              truth.front().t_s, ref_seed)[0]
                       .value;
  }

  std::vector<FieldSample> all;
  for (const auto& row : truth) {
    auto samples = synthesize(s.field, row.state.r_m, row.state.q, sm,
                              s.sensors.array, row.t_s, s.seed);
    if (compensate) {
      const Eigen::Vector3d ref_now =
          synthesize(s.field, *s.sensors.reference_position_m, UnitOrientation(),
                     ref_model, std::nullopt, row.t_s, ref_seed)[0]
              .value;
      // The true attitude stands in for the platform's INS attitude estimate
      // when rotating the reference disturbance into the rover frame.
      const Eigen::Vector3d comp = rotate_inverse(row.state.q, ref_now - ref_baseline);
      for (auto& sample : samples) sample.value -= s.sensors.affine_a * comp;
    }
    all.insert(all.end(), samples.begin(), samples.end());
  }
  return all;
}

namespace {

// Weighted quaternion mean with signs aligned to the heaviest particle.
UnitOrientation mean_orientation(const ParticleSet& ps) {
  int heaviest = 0;
  for (int i = 1; i < ps.size(); ++i) {
    if (ps.particles[i].log_weight > ps.particles[heaviest].log_weight) heaviest = i;
  }
  const Eigen::Vector4d anchor = ps.particles[heaviest].state.q.coeffs();
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  for (const auto& p : ps.particles) {
    Eigen::Vector4d c = p.state.q.coeffs();
    if (c.dot(anchor) < 0.0) c = -c;
    acc += std::exp(p.log_weight) * c;
  }
  return UnitOrientation(acc);
}

EstimateRow estimate_from_particles(double t, const ParticleSet& ps) {
  EstimateRow row;
  row.t_s = t;
  row.r_m = ps.weighted_mean_position();
  row.q = mean_orientation(ps);
  row.pos_cov = ps.position_covariance();
  row.ess = ps.ess();
  return row;
}

ParticleSet init_particles(const Scenario& s, const NavState& truth0,
                           bool with_maps, const MapPosterior* prior) {
  const std::uint64_t est_seed = s.estimator.seed.value_or(s.seed);
  ParticleSet ps;
  ps.particles.resize(s.estimator.n_particles);
  const double lw = -std::log(static_cast<double>(s.estimator.n_particles));
  for (int i = 0; i < s.estimator.n_particles; ++i) {
    Rng rng = Rng::stream(est_seed, kInitStream, static_cast<std::uint64_t>(i));
    Particle& p = ps.particles[i];
    p.log_weight = lw;
    p.state = truth0;
    if (s.estimator.init_uniform_box) {
      const Box& b = *s.estimator.init_uniform_box;
      for (int k = 0; k < 3; ++k) {
        p.state.r_m[k] = b.min_m[k] + rng.uniform() * (b.max_m[k] - b.min_m[k]);
      }
    } else {
      for (int k = 0; k < 3; ++k) {
        p.state.r_m[k] += s.estimator.init_pos_std_m * rng.normal();
      }
    }
    if (s.estimator.init_yaw_std_rad > 0.0) {
      p.state.q = boxplus(p.state.q, Eigen::Vector3d(0.0, 0.0,
                                                     s.estimator.init_yaw_std_rad *
                                                         rng.normal()));
    }
    if (with_maps) p.map = *prior;
  }
  return ps;
}

// Samples grouped per truth step (every sensor of the array).
std::vector<std::vector<FieldSample>> group_by_step(
    const std::vector<FieldSample>& all, const std::vector<TruthRow>& truth) {
  std::vector<std::vector<FieldSample>> grouped(truth.size());
  std::size_t step = 0;
  for (const auto& sample : all) {
    while (step + 1 < truth.size() &&
           std::abs(truth[step + 1].t_s - sample.t_s) <
               std::abs(truth[step].t_s - sample.t_s)) {
      ++step;
    }
    if (std::abs(truth[step].t_s - sample.t_s) > 1e-9) {
      throw TimestampMismatch("measurement timestamp matches no truth step");
    }
    grouped[step].push_back(sample);
  }
  return grouped;
}

Eigen::MatrixXd sensor_noise_matrix(const Scenario& s) {
  const double std_floor = std::max(s.sensors.noise_std_t, 1e-12);
  const int dim = measurement_dim(s.sensors.kind);
  return std_floor * std_floor * Eigen::MatrixXd::Identity(dim, dim);
}

}  // namespace

std::vector<EstimateRow> run_estimator(const Scenario& s,
                                       const std::vector<TruthRow>& truth,
                                       const std::vector<FieldSample>& measurements,
                                       const std::vector<OdometryRow>& odometry) {
  if (truth.empty()) throw ValidationError("empty trajectory");
  if (odometry.size() + 1 != truth.size()) {
    throw ValidationError("odometry rows must pair consecutive truth rows");
  }
  const auto grouped = group_by_step(measurements, truth);
  const Eigen::MatrixXd r_noise = sensor_noise_matrix(s);
  std::vector<EstimateRow> rows;
  rows.reserve(truth.size());

  if (s.estimator.technique == Technique::kDeadReckon) {
    const ArrayGeometry& geom = *s.sensors.array;
    const Eigen::Matrix3d r3 = r_noise;
    const auto first = estimate_jacobian(grouped[0], geom, r3);
    Eigen::Matrix<double, 8, 1> w0;
    w0.head<3>() = first.b0_t;
    w0.tail<5>() = params_from_gradient(first.g_tpm);
    DeadReckonState state =
        dead_reckon_init(truth.front().state, Eigen::Matrix<double, 6, 6>::Zero(), w0,
                         first.covariance);
    DeadReckonConfig cfg{s.estimator.b0_walk_per_m, s.estimator.g_walk_per_m,
                         s.estimator.nees_gate, s.estimator.gate_count};
    EstimateRow row;
    row.t_s = truth[0].t_s;
    row.r_m = state.x.r_m;
    row.q = state.x.q;
    row.pos_cov = state.p.topLeftCorner<3, 3>();
    row.ess = 0.0;
    rows.push_back(row);
    for (std::size_t i = 1; i < truth.size(); ++i) {
      try {
        state = dead_reckon_step(state, odometry[i - 1].u, grouped[i], geom, r3, cfg);
      } catch (const Error& e) {
        throw Error("estimator failed at step " + std::to_string(i) + ": " + e.what());
      }
      row.t_s = truth[i].t_s;
      row.r_m = state.x.r_m;
      row.q = state.x.q;
      row.pos_cov = state.p.topLeftCorner<3, 3>();
      row.ess = 0.0;
      rows.push_back(row);
    }
    return rows;
  }

  // Particle techniques.
  MapPosterior shared_map;
  MapPosterior slam_prior;
  const bool slam = s.estimator.technique == Technique::kSlam;
  if (slam) {
    if (s.slam_basis->kind() == BasisKind::kSpectralPotential) {
      slam_prior = spectral_prior(*s.slam_basis);
    } else {
      const int n = s.slam_basis->weight_count();
      const double var = s.slam_grid_prior_std * s.slam_grid_prior_std;
      slam_prior = MapPosterior{*s.slam_basis, Eigen::VectorXd::Zero(n),
                                var * Eigen::MatrixXd::Identity(n, n)};
    }
  } else {
    shared_map = load_map(*s.map_path);
    for (const auto& row : truth) {
      if (!shared_map.spec.domain().contains(row.state.r_m)) {
        throw ValidationError("trajectory leaves the map domain at t=" +
                              std::to_string(row.t_s));
      }
    }
  }

  FilterConfig cfg;
  cfg.ess_threshold = s.estimator.ess_threshold;
  cfg.log_likelihood_floor = s.estimator.likelihood_floor_log;
  cfg.seed = s.estimator.seed.value_or(s.seed);
  cfg.parallel = s.estimator.parallel;

  ParticleSet ps = init_particles(s, truth.front().state, slam, &slam_prior);
  rows.push_back(estimate_from_particles(truth[0].t_s, ps));
  for (std::size_t i = 1; i < truth.size(); ++i) {
    try {
      if (slam) {
        ps = slam_step(ps, odometry[i - 1].u, grouped[i], s.sensors.array, r_noise,
                       cfg, i);
      } else {
        ps = map_match_step(ps, shared_map, odometry[i - 1].u, grouped[i],
                            s.sensors.array, r_noise, cfg, i);
      }
    } catch (const Error& e) {
      throw Error("estimator failed at step " + std::to_string(i) + ": " + e.what());
    }
    rows.push_back(estimate_from_particles(truth[i].t_s, ps));
  }
  return rows;
}

RunOutputs run_scenario(const Scenario& s) {
  RunOutputs out;
  out.truth = generate_truth(s);
  out.odometry = synthesize_odometry(s, out.truth);
  out.measurements = synthesize_measurements(s, out.truth);

  const auto started = std::chrono::steady_clock::now();
  out.estimate = run_estimator(s, out.truth, out.measurements, out.odometry);
  const auto finished = std::chrono::steady_clock::now();

  out.metrics = compute_metrics(out.truth, out.estimate);
  out.metrics.wall_clock_s =
      std::chrono::duration<double>(finished - started).count();
  return out;
}

}  // namespace magnav
