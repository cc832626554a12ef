#include "magnav/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "magnav/errors.hpp"

namespace magnav {

RunMetrics compute_metrics(const std::vector<TruthRow>& truth,
                           const std::vector<EstimateRow>& estimate) {
  if (truth.size() != estimate.size()) {
    throw TimestampMismatch("truth and estimate logs differ in length");
  }
  RunMetrics m;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (std::abs(truth[i].t_s - estimate[i].t_s) > 1e-9) {
      throw TimestampMismatch("timestamps diverge at row " + std::to_string(i));
    }
    const Eigen::Vector3d e = estimate[i].r_m - truth[i].state.r_m;
    const double err = e.norm();
    m.per_step_error_m.push_back(err);
    sum_sq += err * err;
    m.ess.push_back(estimate[i].ess);

    const Eigen::Matrix3d& p = estimate[i].pos_cov;
    if (!p.isZero(0.0)) {
      Eigen::LDLT<Eigen::Matrix3d> ldlt(p);
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        m.nees.push_back(e.dot(ldlt.solve(e)));
      } else {
        m.nees.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
  }
  if (!truth.empty()) {
    m.rmse_m = std::sqrt(sum_sq / truth.size());
    m.final_error_m = m.per_step_error_m.back();
  }
  return m;
}

nlohmann::json metrics_to_json(const RunMetrics& m) {
  nlohmann::json j;
  j["rmse_m"] = m.rmse_m;
  j["final_error_m"] = m.final_error_m;
  j["steps"] = m.per_step_error_m.size();
  j["per_step_error_m"] = m.per_step_error_m;
  if (!m.nees.empty()) {
    j["nees"] = m.nees;
    double sum = 0.0;
    for (double v : m.nees) sum += v;
    j["mean_nees"] = sum / m.nees.size();
  }
  if (!m.ess.empty()) j["ess"] = m.ess;
  return j;
}

void save_metrics(const RunMetrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << metrics_to_json(m).dump(2) << "\n";
}

}  // namespace magnav
