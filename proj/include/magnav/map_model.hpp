#pragma once

#include <Eigen/Dense>
#include <array>
#include <variant>

#include "magnav/errors.hpp"
#include "magnav/geometry.hpp"

namespace magnav {

// Measurement-function branch: what the sensed quantity is relative to what
// the map models. vector_field: y = C^s_m(q) * Phi^T(r) w. potential_gradient:
// y = -C^s_m(q) * grad Phi^T(r) w. magnitude: y = Phi^T(r) w (1 row,
// orientation independent).
enum class MeasurementKind { kVectorField, kPotentialGradient, kMagnitude };

struct Box {
  Eigen::Vector3d min_m = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_m = Eigen::Vector3d::Ones();

  bool contains(const Eigen::Vector3d& r) const {
    return (r.array() >= min_m.array()).all() && (r.array() <= max_m.array()).all();
  }
  Eigen::Vector3d extent() const { return max_m - min_m; }
  Eigen::Vector3d center() const { return 0.5 * (min_m + max_m); }
  double volume() const { return extent().prod(); }
};

// Piecewise-constant indicator basis. value_dim 3 stores a vector field
// (three weights per cell), value_dim 1 a scalar magnitude map.
struct GridParams {
  Eigen::Vector3i cells = Eigen::Vector3i::Ones();
  int value_dim = 3;
};

// First-order curl- and divergence-free polynomial B(r) = b0 + G (r - c),
// G symmetric traceless. Weights: [b0 (3); Gxx, Gyy, Gxy, Gxz, Gyz].
struct PolynomialCdfParams {
  Eigen::Vector3d center_m = Eigen::Vector3d::Zero();
};

// Reduced-rank squared-exponential scalar-potential basis: Dirichlet sine
// eigenfunctions on the domain box padded by 20% per axis, plus three
// linear-potential columns that carry the constant field component.
struct SpectralPotentialParams {
  Eigen::Vector3i modes = Eigen::Vector3i::Constant(4);
  double sigma_se_tm = 1e-6;  // kernel magnitude, T*m (potential units)
  double ell_se_m = 1.0;      // kernel length scale, m
  double sigma_lin = 1e-5;    // prior std on the linear-potential weights
};

enum class BasisKind { kGrid, kPolynomialCdf, kSpectralPotential };

class BasisSpec {
public:
  BasisSpec() = default;
  BasisSpec(Box domain, GridParams p);
  BasisSpec(Box domain, PolynomialCdfParams p);
  BasisSpec(Box domain, SpectralPotentialParams p);

  BasisKind kind() const { return kind_; }
  const Box& domain() const { return domain_; }
  int weight_count() const { return weight_count_; }

  const GridParams& grid() const { return std::get<GridParams>(params_); }
  const PolynomialCdfParams& polynomial() const {
    return std::get<PolynomialCdfParams>(params_);
  }
  const SpectralPotentialParams& spectral() const {
    return std::get<SpectralPotentialParams>(params_);
  }

  // Padded box carrying the sine eigenfunctions (spectral only).
  Box spectral_padded_box() const;

  // Linear cell index of r, throws OutOfDomain outside the box (grid only).
  int grid_cell_index(const Eigen::Vector3d& r) const;

private:
  BasisKind kind_ = BasisKind::kGrid;
  Box domain_;
  std::variant<GridParams, PolynomialCdfParams, SpectralPotentialParams> params_;
  int weight_count_ = 0;
};

// Gaussian weight posterior over a basis. An exactly zero covariance denotes
// a deterministic map.
struct MapPosterior {
  BasisSpec spec;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  static MapPosterior deterministic(BasisSpec s, Eigen::VectorXd w);
};

// Basis matrices of the 5-dimensional symmetric-traceless gradient space,
// order {Gxx, Gyy, Gxy, Gxz, Gyz} with Gzz = -Gxx - Gyy.
const std::array<Eigen::Matrix3d, 5>& gradient_basis();

// Pack/unpack between a symmetric traceless matrix and its 5 parameters.
Eigen::Matrix3d gradient_from_params(const Eigen::Matrix<double, 5, 1>& g);
Eigen::Matrix<double, 5, 1> params_from_gradient(const Eigen::Matrix3d& g);

// H with rows = measurement dimension and cols = weight_count such that the
// expected measurement is H * w.
Eigen::MatrixXd regressor(const BasisSpec& spec, MeasurementKind kind,
                          const Eigen::Vector3d& r, const UnitOrientation& q);

// Measurement-space posterior (H mu, H P H^T) at a pose.
struct MapEvaluation {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
MapEvaluation eval_map(const MapPosterior& mp, MeasurementKind kind,
                       const Eigen::Vector3d& r, const UnitOrientation& q);

// Zero-mean prior with the squared-exponential spectral density on the sine
// columns and sigma_lin^2 on the linear-potential columns.
MapPosterior spectral_prior(const BasisSpec& spec);

// Regressor branch for a sensor channel (vector reading vs magnitude
// reading) against a given basis: vector readings pair with kVectorField for
// bases that model the field and kPotentialGradient for potential bases.
MeasurementKind branch_for(const BasisSpec& spec, MeasurementKind channel);

// Measurement dimension of a branch (3 or 1).
inline int measurement_dim(MeasurementKind kind) {
  return kind == MeasurementKind::kMagnitude ? 1 : 3;
}

}  // namespace magnav
