#include "magnav/map_learning.hpp"

#include <cmath>
#include <limits>

namespace magnav {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kConditionLimit = 1e12;

// Solves S x = b for symmetric positive definite S; throws when S is
// numerically singular (condition above kConditionLimit).
Eigen::LDLT<Eigen::MatrixXd> factor_innovation(const Eigen::MatrixXd& s) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  const double dmin = d.minCoeff();
  if (ldlt.info() != Eigen::Success || dmin <= 0.0 || dmax / dmin > kConditionLimit) {
    throw SingularInnovation("innovation covariance not invertible");
  }
  return ldlt;
}

void check_record(const MapPosterior& mp, const LearningRecord& rec) {
  const int dim = measurement_dim(branch_for(mp.spec, rec.kind));
  if (rec.y.size() != dim || rec.R.rows() != dim || rec.R.cols() != dim) {
    throw ValidationError("record dimensions inconsistent with measurement kind");
  }
}

struct Stacked {
  Eigen::MatrixXd h;       // sum(rows) x L
  Eigen::VectorXd y;
  Eigen::MatrixXd r_blk;   // block diagonal
};

Stacked stack_records(const BasisSpec& spec,
                      const std::vector<LearningRecord>& records) {
  int rows = 0;
  for (const auto& rec : records) rows += measurement_dim(branch_for(spec, rec.kind));
  const int n = spec.weight_count();
  Stacked s{Eigen::MatrixXd::Zero(rows, n), Eigen::VectorXd::Zero(rows),
            Eigen::MatrixXd::Zero(rows, rows)};
  int at = 0;
  for (const auto& rec : records) {
    const MeasurementKind branch = branch_for(spec, rec.kind);
    const int dim = measurement_dim(branch);
    s.h.middleRows(at, dim) = regressor(spec, branch, rec.r, rec.q);
    s.y.segment(at, dim) = rec.y;
    s.r_blk.block(at, at, dim, dim) = rec.R;
    at += dim;
  }
  return s;
}

}  // namespace

MapPosterior rls_update(const MapPosterior& mp, const LearningRecord& rec) {
  check_record(mp, rec);
  const MeasurementKind branch = branch_for(mp.spec, rec.kind);
  const Eigen::MatrixXd h = regressor(mp.spec, branch, rec.r, rec.q);
  const Eigen::MatrixXd pht = mp.covariance * h.transpose();
  const Eigen::MatrixXd s = h * pht + rec.R;
  const auto ldlt = factor_innovation(s);
  const Eigen::MatrixXd k = ldlt.solve(pht.transpose()).transpose();

  MapPosterior out = mp;
  out.mean += k * (rec.y - h * mp.mean);
  const Eigen::MatrixXd ikh =
      Eigen::MatrixXd::Identity(mp.mean.size(), mp.mean.size()) - k * h;
  Eigen::MatrixXd p = ikh * mp.covariance * ikh.transpose() + k * rec.R * k.transpose();
  out.covariance = 0.5 * (p + p.transpose());
  return out;
}

MapPosterior batch_map(const MapPosterior& prior,
                       const std::vector<LearningRecord>& records) {
  if (records.empty()) return prior;
  for (const auto& rec : records) check_record(prior, rec);
  const Stacked s = stack_records(prior.spec, records);

  // One joint update; valid for any PSD prior covariance, including the
  // degenerate deterministic case.
  const Eigen::MatrixXd pht = prior.covariance * s.h.transpose();
  const Eigen::MatrixXd innovation = s.h * pht + s.r_blk;
  const auto ldlt = factor_innovation(innovation);
  const Eigen::MatrixXd k = ldlt.solve(pht.transpose()).transpose();

  MapPosterior out = prior;
  out.mean += k * (s.y - s.h * prior.mean);
  const Eigen::MatrixXd ikh =
      Eigen::MatrixXd::Identity(prior.mean.size(), prior.mean.size()) - k * s.h;
  Eigen::MatrixXd p =
      ikh * prior.covariance * ikh.transpose() + k * s.r_blk * k.transpose();
  out.covariance = 0.5 * (p + p.transpose());
  return out;
}

double log_marginal_likelihood(const MapPosterior& prior,
                               const std::vector<LearningRecord>& records) {
  if (records.empty()) return 0.0;
  for (const auto& rec : records) check_record(prior, rec);
  const Stacked s = stack_records(prior.spec, records);
  const Eigen::MatrixXd cov = s.h * prior.covariance * s.h.transpose() + s.r_blk;
  const auto ldlt = factor_innovation(cov);
  const Eigen::VectorXd resid = s.y - s.h * prior.mean;
  const double quad = resid.dot(ldlt.solve(resid));
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * (resid.size() * kLog2Pi + logdet + quad);
}

namespace {

// Maximized log-likelihood under a flat weight prior (weighted least squares).
double max_log_likelihood(const BasisSpec& spec,
                          const std::vector<LearningRecord>& records) {
  const Stacked s = stack_records(spec, records);
  // Whiten rows by the block-diagonal noise, then ordinary least squares.
  Eigen::LLT<Eigen::MatrixXd> rchol(s.r_blk);
  if (rchol.info() != Eigen::Success) {
    throw ValidationError("measurement covariance not positive definite");
  }
  const Eigen::MatrixXd hw = rchol.matrixL().solve(s.h);
  const Eigen::VectorXd yw = rchol.matrixL().solve(s.y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(hw);
  qr.setThreshold(1e-10);
  if (qr.rank() < s.h.cols()) {
    throw RankDeficient("records do not identify all basis weights");
  }
  const Eigen::VectorXd w = qr.solve(yw);
  const double quad = (yw - hw * w).squaredNorm();
  const double logdet_r =
      Eigen::LDLT<Eigen::MatrixXd>(s.r_blk).vectorD().array().log().sum();
  return -0.5 * (s.y.size() * kLog2Pi + logdet_r + quad);
}

}  // namespace

BasisSpec select_order_aic(const std::vector<BasisSpec>& candidates,
                           const std::vector<LearningRecord>& records) {
  if (candidates.empty()) throw ValidationError("need at least one candidate basis");
  double best_aic = std::numeric_limits<double>::infinity();
  int best_l = std::numeric_limits<int>::max();
  const BasisSpec* best = nullptr;
  for (const auto& cand : candidates) {
    const int l = cand.weight_count();
    const double aic = 2.0 * l - 2.0 * max_log_likelihood(cand, records);
    if (aic < best_aic || (aic == best_aic && l < best_l)) {
      best_aic = aic;
      best_l = l;
      best = &cand;
    }
  }
  return *best;
}

}  // namespace magnav
