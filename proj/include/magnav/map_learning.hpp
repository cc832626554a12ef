#pragma once

#include <Eigen/Dense>
#include <vector>

#include "magnav/map_model.hpp"

namespace magnav {

// One measurement along a known trajectory. kind is the sensor channel
// (vector or magnitude reading); the regressor branch is chosen per basis
// with branch_for.
struct LearningRecord {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  UnitOrientation q;
  Eigen::VectorXd y;   // 3-vector (tesla) or scalar (tesla)
  Eigen::MatrixXd R;   // measurement covariance, tesla^2
  MeasurementKind kind = MeasurementKind::kVectorField;
};

// Single recursive least-squares (Kalman) update of the weight posterior.
// Covariance update uses the Joseph form; never increases uncertainty.
MapPosterior rls_update(const MapPosterior& mp, const LearningRecord& rec);

// Exact posterior from all records as one stacked update. Order independent;
// serves as the oracle for the recursive path.
MapPosterior batch_map(const MapPosterior& prior,
                       const std::vector<LearningRecord>& records);

// log N(y_stack; H_stack mu0, H_stack P0 H_stack^T + blkdiag(R)).
double log_marginal_likelihood(const MapPosterior& prior,
                               const std::vector<LearningRecord>& records);

// Akaike information criterion over candidate bases with a noninformative
// weight prior: argmin 2 L - 2 max-log-likelihood; ties toward smaller L.
BasisSpec select_order_aic(const std::vector<BasisSpec>& candidates,
                           const std::vector<LearningRecord>& records);

}  // namespace magnav
