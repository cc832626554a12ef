#pragma once

#include <string>
#include <vector>

#include "magnav/csv.hpp"

#include <json.hpp>

namespace magnav {

struct RunMetrics {
  std::vector<double> per_step_error_m;
  double rmse_m = 0.0;
  double final_error_m = 0.0;
  std::vector<double> nees;  // empty when the estimate carries no covariance
  std::vector<double> ess;
  double wall_clock_s = 0.0;
};

// Per-step position error, RMSE, final error and (when a covariance is
// present) NEES = e^T P^-1 e. Throws TimestampMismatch on misaligned logs.
RunMetrics compute_metrics(const std::vector<TruthRow>& truth,
                           const std::vector<EstimateRow>& estimate);

// wall_clock_s is intentionally not serialized: output files are part of the
// determinism contract.
nlohmann::json metrics_to_json(const RunMetrics& m);

void save_metrics(const RunMetrics& m, const std::string& path);

}  // namespace magnav
