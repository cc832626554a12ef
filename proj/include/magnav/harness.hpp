#pragma once

#include <map>
#include <vector>

#include "magnav/metrics.hpp"
#include "magnav/particle_filter.hpp"
#include "magnav/scenario.hpp"

namespace magnav {

struct RunOutputs {
  std::vector<TruthRow> truth;
  std::vector<FieldSample> measurements;  // compensated when a reference is active
  std::vector<OdometryRow> odometry;
  std::vector<EstimateRow> estimate;
  RunMetrics metrics;
};

// Truth poses sampled at the sensor rate.
std::vector<TruthRow> generate_truth(const Scenario& s);

// Noisy body-frame odometry between consecutive truth poses, plus the
// matching per-step process noise covariance.
std::vector<OdometryRow> synthesize_odometry(const Scenario& s,
                                             const std::vector<TruthRow>& truth);

// Rover measurements for every truth pose; applies reference-sensor
// compensation when configured and the field carries a temporal term.
std::vector<FieldSample> synthesize_measurements(const Scenario& s,
                                                 const std::vector<TruthRow>& truth);

// Full pipeline: simulate, estimate, score. Deterministic in (scenario, seed).
RunOutputs run_scenario(const Scenario& s);

// Estimation over pre-simulated logs (the CLI's replay path).
std::vector<EstimateRow> run_estimator(const Scenario& s,
                                       const std::vector<TruthRow>& truth,
                                       const std::vector<FieldSample>& measurements,
                                       const std::vector<OdometryRow>& odometry);

}  // namespace magnav
