#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "magnav/harness.hpp"
#include "magnav/map_io.hpp"
#include "magnav/map_learning.hpp"

namespace {

using namespace magnav;
using nlohmann::json;

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

Scenario load_with_overrides(const std::string& path, std::optional<std::uint64_t> seed,
                             const std::string& technique) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario JSON parse error: ") + e.what());
  }
  if (seed) j["seed"] = *seed;
  if (!technique.empty()) j["estimator"]["technique"] = technique;
  return scenario_from_json(j);
}

int cmd_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
  const Scenario s = load_with_overrides(scenario_path, seed, "");
  fs::create_directories(out_dir);
  const auto truth = generate_truth(s);
  const auto odometry = synthesize_odometry(s, truth);
  const auto measurements = synthesize_measurements(s, truth);
  write_truth_csv(join(out_dir, "truth.csv"), truth);
  write_odometry_csv(join(out_dir, "odometry.csv"), odometry);
  write_measurements_csv(join(out_dir, "measurements.csv"), measurements);
  std::cout << "wrote " << truth.size() << " truth rows, " << measurements.size()
            << " measurements to " << out_dir << "\n";
  return 0;
}

int cmd_learn_map(const std::string& measurements_path, const std::string& trajectory_path,
                  const std::string& basis_path, const std::string& out_path,
                  double prior_std, double noise_std) {
  std::ifstream in(basis_path);
  if (!in) throw ValidationError("cannot open basis config: " + basis_path);
  json bj;
  in >> bj;
  BasisSpec spec = basis_spec_from_json(bj);
  if (!(noise_std > 0.0)) throw ValidationError("--noise-std must be positive");

  const auto truth = read_truth_csv(trajectory_path);
  const auto samples = read_measurements_csv(measurements_path);
  if (truth.empty()) throw ValidationError("empty trajectory log");

  // Pose lookup by timestamp; sensors are assumed at the body origin here
  // (learn-map consumes single-sensor survey logs).
  std::vector<LearningRecord> records;
  std::size_t step = 0;
  for (const auto& sample : samples) {
    while (step + 1 < truth.size() &&
           std::abs(truth[step + 1].t_s - sample.t_s) <
               std::abs(truth[step].t_s - sample.t_s)) {
      ++step;
    }
    if (std::abs(truth[step].t_s - sample.t_s) > 1e-9) {
      throw TimestampMismatch("measurement timestamp matches no trajectory row");
    }
    LearningRecord rec;
    rec.r = truth[step].state.r_m;
    rec.q = truth[step].state.q;
    rec.y = sample.vector_value();
    const int dim = static_cast<int>(rec.y.size());
    rec.R = noise_std * noise_std * Eigen::MatrixXd::Identity(dim, dim);
    rec.kind = sample.kind;
    records.push_back(std::move(rec));
  }

  MapPosterior prior;
  if (spec.kind() == BasisKind::kSpectralPotential) {
    prior = spectral_prior(spec);
  } else {
    const int n = spec.weight_count();
    prior = MapPosterior{spec, Eigen::VectorXd::Zero(n),
                         prior_std * prior_std * Eigen::MatrixXd::Identity(n, n)};
  }
  const MapPosterior posterior = batch_map(prior, records);
  save_map(posterior, out_path);
  std::cout << "learned map with " << posterior.mean.size() << " weights from "
            << records.size() << " records -> " << out_path << "\n";
  return 0;
}

int cmd_localize(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, const std::string& technique,
                 const std::string& measurements_path, const std::string& odometry_path,
                 const std::string& truth_path) {
  const Scenario s = load_with_overrides(scenario_path, seed, technique);
  fs::create_directories(out_dir);

  RunOutputs out;
  if (!measurements_path.empty() || !odometry_path.empty() || !truth_path.empty()) {
    if (measurements_path.empty() || odometry_path.empty() || truth_path.empty()) {
      throw ValidationError("log replay needs --truth, --measurements and --odometry");
    }
    out.truth = read_truth_csv(truth_path);
    out.measurements = read_measurements_csv(measurements_path);
    auto odometry = read_odometry_csv(odometry_path);
    // Rebuild the per-step noise covariance from the scenario's odometry model.
    for (auto& row : odometry) {
      const double dist = row.u.v_body_mps.norm() * row.u.dt_s;
      const double pos_std =
          s.odometry.pos_noise_frac * dist + s.odometry.pos_noise_floor_m;
      row.u.noise_cov.setZero();
      row.u.noise_cov.topLeftCorner<3, 3>() =
          pos_std * pos_std * Eigen::Matrix3d::Identity();
      row.u.noise_cov.bottomRightCorner<3, 3>() =
          s.odometry.ang_noise_rad * s.odometry.ang_noise_rad *
          Eigen::Matrix3d::Identity();
    }
    out.odometry = std::move(odometry);
    const auto started = std::chrono::steady_clock::now();
    out.estimate = run_estimator(s, out.truth, out.measurements, out.odometry);
    out.metrics = compute_metrics(out.truth, out.estimate);
    out.metrics.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
  } else {
    out = run_scenario(s);
  }

  write_estimate_csv(join(out_dir, "estimate.csv"), out.estimate);
  save_metrics(out.metrics, join(out_dir, "metrics.json"));
  // Wall clock stays off the deterministic outputs.
  std::fprintf(stderr, "wall_clock_s=%.3f\n", out.metrics.wall_clock_s);
  std::cout << "rmse_m=" << out.metrics.rmse_m
            << " final_error_m=" << out.metrics.final_error_m << "\n";
  return 0;
}

int cmd_calibrate(const std::string& measurements_path, const std::string& out_path,
                  std::optional<double> field_norm) {
  const auto samples = read_measurements_csv(measurements_path);
  const CalibrationResult cal = ellipsoid_calibrate(samples, field_norm);
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot open for writing: " + out_path);
  out << calibration_to_json(cal).dump(2) << "\n";
  std::cout << "calibration residual (norm spread) = " << cal.residual << "\n";
  return 0;
}

int cmd_crlb(const std::string& config_path, const std::string& out_path) {
  std::ifstream in(config_path);
  if (!in) throw ValidationError("cannot open crlb config: " + config_path);
  json j;
  in >> j;

  ArrayGeometry geom;
  for (const auto& d : j.at("array_offsets_m")) {
    geom.offsets_m.emplace_back(d.at(0).get<double>(), d.at(1).get<double>(),
                                d.at(2).get<double>());
  }
  const auto g_vec = j.at("g_true_tpm").get<std::vector<double>>();
  if (g_vec.size() != 9) throw ValidationError("g_true_tpm needs 9 row-major entries");
  Eigen::Matrix3d g;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) g(r, c) = g_vec[3 * r + c];
  }
  const double noise = j.at("noise_std_t").get<double>();
  Eigen::Vector3d b0 = Eigen::Vector3d::Zero();
  if (j.contains("b0_true_t")) {
    const auto& b = j["b0_true_t"];
    b0 = Eigen::Vector3d(b.at(0).get<double>(), b.at(1).get<double>(),
                         b.at(2).get<double>());
  }
  std::optional<DisplacementPrior> prior;
  if (j.contains("prior_std")) {
    DisplacementPrior p;
    const auto stds = j["prior_std"].get<std::vector<double>>();
    if (stds.size() != 2) throw ValidationError("prior_std needs [pos, rot] entries");
    p.cov.setZero();
    p.cov.topLeftCorner<3, 3>() = stds[0] * stds[0] * Eigen::Matrix3d::Identity();
    p.cov.bottomRightCorner<3, 3>() = stds[1] * stds[1] * Eigen::Matrix3d::Identity();
    prior = p;
  }

  const DisplacementCrlb bound = crlb_displacement(
      geom, g, noise * noise * Eigen::Matrix3d::Identity(), prior, b0);
  json out_json;
  out_json["unbounded"] = bound.unbounded;
  if (!bound.unbounded) {
    std::vector<double> cov;
    for (int r = 0; r < 6; ++r) {
      for (int c = 0; c < 6; ++c) cov.push_back(bound.pose_cov(r, c));
    }
    out_json["pose_cov"] = cov;
    for (int k = 0; k < 3; ++k) {
      out_json["dr_std_m"].push_back(std::sqrt(bound.pose_cov(k, k)));
      out_json["dq_std_rad"].push_back(std::sqrt(bound.pose_cov(3 + k, 3 + k)));
    }
  } else {
    for (const auto& dir : bound.unbounded_directions) {
      std::vector<double> v(dir.data(), dir.data() + 6);
      out_json["unbounded_directions"].push_back(v);
    }
  }
  std::ofstream out(out_path);
  if (!out) throw ValidationError("cannot open for writing: " + out_path);
  out << out_json.dump(2) << "\n";
  std::cout << (bound.unbounded ? "bound has unbounded directions"
                                : "bound written")
            << " -> " << out_path << "\n";
  return 0;
}

int cmd_metrics(const std::string& truth_path, const std::string& estimate_path,
                const std::string& out_path) {
  const auto truth = read_truth_csv(truth_path);
  const auto estimate = read_estimate_csv(estimate_path);
  const RunMetrics m = compute_metrics(truth, estimate);
  save_metrics(m, out_path);
  std::cout << "rmse_m=" << m.rmse_m << " final_error_m=" << m.final_error_m << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"magnav: magnetic-field localization simulator and estimators"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = ".", technique;
  std::optional<std::uint64_t> seed;

  auto* sim = app.add_subcommand("simulate", "scenario -> truth/odometry/measurement CSVs");
  sim->add_option("--scenario", scenario_path, "scenario JSON")->required();
  sim->add_option("--seed", seed, "override the scenario seed");
  sim->add_option("--out", out_dir, "output directory");

  std::string measurements_path, trajectory_path, basis_path, map_out = "map.json";
  double prior_std = 1e-5;
  double learn_noise_std = 1e-7;
  auto* learn = app.add_subcommand("learn-map", "measurements + trajectory -> map JSON");
  learn->add_option("--measurements", measurements_path, "measurement CSV")->required();
  learn->add_option("--trajectory", trajectory_path, "trajectory CSV (truth format)")
      ->required();
  learn->add_option("--basis", basis_path, "basis spec JSON")->required();
  learn->add_option("--out", map_out, "output map JSON path");
  learn->add_option("--prior-std", prior_std, "weight prior std for grid/polynomial");
  learn->add_option("--noise-std", learn_noise_std, "measurement noise std, tesla");

  std::string loc_measurements, loc_odometry, loc_truth;
  auto* loc = app.add_subcommand("localize", "run an estimator -> estimate CSV + metrics");
  loc->add_option("--scenario", scenario_path, "scenario JSON")->required();
  loc->add_option("--seed", seed, "override the scenario seed");
  loc->add_option("--out", out_dir, "output directory");
  loc->add_option("--technique", technique, "map_match|slam|dead_reckon override");
  loc->add_option("--measurements", loc_measurements, "replay: measurement CSV");
  loc->add_option("--odometry", loc_odometry, "replay: odometry CSV");
  loc->add_option("--truth", loc_truth, "replay: truth CSV");

  std::string cal_out = "calibration.json";
  std::optional<double> field_norm;
  auto* cal = app.add_subcommand("calibrate", "raw vector CSV -> calibration JSON");
  cal->add_option("--measurements", measurements_path, "raw measurement CSV")->required();
  cal->add_option("--out", cal_out, "output JSON path");
  cal->add_option("--field-norm", field_norm, "known field magnitude (fixes gain scale)");

  std::string crlb_config, crlb_out = "crlb.json";
  auto* crlb = app.add_subcommand("crlb", "array/field config -> displacement bound JSON");
  crlb->add_option("--config", crlb_config, "config JSON")->required();
  crlb->add_option("--out", crlb_out, "output JSON path");

  std::string met_truth, met_estimate, met_out = "metrics.json";
  auto* met = app.add_subcommand("metrics", "truth + estimate CSVs -> metrics JSON");
  met->add_option("--truth", met_truth, "truth CSV")->required();
  met->add_option("--estimate", met_estimate, "estimate CSV")->required();
  met->add_option("--out", met_out, "output JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(scenario_path, seed, out_dir);
    if (learn->parsed()) {
      return cmd_learn_map(measurements_path, trajectory_path, basis_path, map_out,
                           prior_std, learn_noise_std);
    }
    if (loc->parsed()) {
      return cmd_localize(scenario_path, seed, out_dir, technique, loc_measurements,
                          loc_odometry, loc_truth);
    }
    if (cal->parsed()) return cmd_calibrate(measurements_path, cal_out, field_norm);
    if (crlb->parsed()) return cmd_crlb(crlb_config, crlb_out);
    if (met->parsed()) return cmd_metrics(met_truth, met_estimate, met_out);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
