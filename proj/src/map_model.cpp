#include "magnav/map_model.hpp"

#include <cmath>

namespace magnav {

namespace {
constexpr double kPi = 3.14159265358979323846;

void check_domain(const Box& b) {
  if (!(b.volume() > 0.0)) throw ValidationError("basis domain must have positive volume");
}
}  // namespace

BasisSpec::BasisSpec(Box domain, GridParams p)
    : kind_(BasisKind::kGrid), domain_(domain), params_(p) {
  check_domain(domain_);
  if ((p.cells.array() < 1).any()) throw ValidationError("grid needs >= 1 cell per axis");
  if (p.value_dim != 1 && p.value_dim != 3) {
    throw ValidationError("grid value_dim must be 1 or 3");
  }
  weight_count_ = p.cells.prod() * p.value_dim;
}

BasisSpec::BasisSpec(Box domain, PolynomialCdfParams p)
    : kind_(BasisKind::kPolynomialCdf), domain_(domain), params_(p) {
  check_domain(domain_);
  weight_count_ = 8;
}

BasisSpec::BasisSpec(Box domain, SpectralPotentialParams p)
    : kind_(BasisKind::kSpectralPotential), domain_(domain), params_(p) {
  check_domain(domain_);
  if ((p.modes.array() < 1).any()) throw ValidationError("spectral needs >= 1 mode per axis");
  if (p.ell_se_m <= 0.0) throw ValidationError("spectral length scale must be positive");
  // Sine modes plus three linear-potential columns for the constant field.
  weight_count_ = p.modes.prod() + 3;
}

Box BasisSpec::spectral_padded_box() const {
  // 20% padding per axis on each side, mitigates Dirichlet boundary decay.
  const Eigen::Vector3d pad = 0.2 * domain_.extent();
  return Box{domain_.min_m - pad, domain_.max_m + pad};
}

int BasisSpec::grid_cell_index(const Eigen::Vector3d& r) const {
  if (!domain_.contains(r)) throw OutOfDomain("position outside grid domain");
  const GridParams& p = grid();
  Eigen::Vector3i idx;
  for (int a = 0; a < 3; ++a) {
    const double frac = (r[a] - domain_.min_m[a]) / domain_.extent()[a];
    idx[a] = std::min(static_cast<int>(frac * p.cells[a]), p.cells[a] - 1);
  }
  return (idx[0] * p.cells[1] + idx[1]) * p.cells[2] + idx[2];
}

MapPosterior MapPosterior::deterministic(BasisSpec s, Eigen::VectorXd w) {
  const int n = s.weight_count();
  if (w.size() != n) throw ValidationError("weight vector size mismatch");
  return MapPosterior{std::move(s), std::move(w), Eigen::MatrixXd::Zero(n, n)};
}

const std::array<Eigen::Matrix3d, 5>& gradient_basis() {
  static const std::array<Eigen::Matrix3d, 5> basis = [] {
    std::array<Eigen::Matrix3d, 5> b;
    for (auto& m : b) m.setZero();
    b[0](0, 0) = 1.0;
    b[0](2, 2) = -1.0;  // Gxx - Gzz
    b[1](1, 1) = 1.0;
    b[1](2, 2) = -1.0;  // Gyy - Gzz
    b[2](0, 1) = b[2](1, 0) = 1.0;
    b[3](0, 2) = b[3](2, 0) = 1.0;
    b[4](1, 2) = b[4](2, 1) = 1.0;
    return b;
  }();
  return basis;
}

Eigen::Matrix3d gradient_from_params(const Eigen::Matrix<double, 5, 1>& g) {
  const auto& basis = gradient_basis();
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 5; ++i) out += g[i] * basis[i];
  return out;
}

Eigen::Matrix<double, 5, 1> params_from_gradient(const Eigen::Matrix3d& g) {
  Eigen::Matrix<double, 5, 1> p;
  p << g(0, 0), g(1, 1), g(0, 1), g(0, 2), g(1, 2);
  return p;
}

namespace {

// Values of all basis functions of the spectral scalar potential at r.
Eigen::VectorXd spectral_values(const BasisSpec& spec, const Eigen::Vector3d& r) {
  const auto& p = spec.spectral();
  const Box pb = spec.spectral_padded_box();
  const Eigen::Vector3d len = pb.extent();
  const Eigen::Vector3d u = r - pb.min_m;
  const int n_sine = p.modes.prod();
  Eigen::VectorXd phi(n_sine + 3);
  const double norm = std::sqrt(8.0 / len.prod());
  int j = 0;
  for (int i1 = 1; i1 <= p.modes[0]; ++i1) {
    for (int i2 = 1; i2 <= p.modes[1]; ++i2) {
      for (int i3 = 1; i3 <= p.modes[2]; ++i3, ++j) {
        phi[j] = norm * std::sin(i1 * kPi * u.x() / len.x()) *
                 std::sin(i2 * kPi * u.y() / len.y()) *
                 std::sin(i3 * kPi * u.z() / len.z());
      }
    }
  }
  const Eigen::Vector3d c = spec.domain().center();
  phi.tail<3>() = r - c;
  return phi;
}

// Gradients of all basis functions, one column per basis function.
Eigen::MatrixXd spectral_gradients(const BasisSpec& spec, const Eigen::Vector3d& r) {
  const auto& p = spec.spectral();
  const Box pb = spec.spectral_padded_box();
  const Eigen::Vector3d len = pb.extent();
  const Eigen::Vector3d u = r - pb.min_m;
  const int n_sine = p.modes.prod();
  Eigen::MatrixXd grad(3, n_sine + 3);
  const double norm = std::sqrt(8.0 / len.prod());
  int j = 0;
  for (int i1 = 1; i1 <= p.modes[0]; ++i1) {
    const double a1 = i1 * kPi / len.x();
    const double s1 = std::sin(a1 * u.x()), c1 = std::cos(a1 * u.x());
    for (int i2 = 1; i2 <= p.modes[1]; ++i2) {
      const double a2 = i2 * kPi / len.y();
      const double s2 = std::sin(a2 * u.y()), c2 = std::cos(a2 * u.y());
      for (int i3 = 1; i3 <= p.modes[2]; ++i3, ++j) {
        const double a3 = i3 * kPi / len.z();
        const double s3 = std::sin(a3 * u.z()), c3 = std::cos(a3 * u.z());
        grad(0, j) = norm * a1 * c1 * s2 * s3;
        grad(1, j) = norm * s1 * a2 * c2 * s3;
        grad(2, j) = norm * s1 * s2 * a3 * c3;
      }
    }
  }
  grad.rightCols<3>().setIdentity();
  return grad;
}

[[noreturn]] void kind_mismatch(const char* what) { throw KindMismatch(what); }

}  // namespace

Eigen::MatrixXd regressor(const BasisSpec& spec, MeasurementKind kind,
                          const Eigen::Vector3d& r, const UnitOrientation& q) {
  const int n = spec.weight_count();
  const Eigen::Matrix3d c_sm = q.rotation_matrix().transpose();  // map -> sensor
  switch (spec.kind()) {
    case BasisKind::kGrid: {
      const int dim = spec.grid().value_dim;
      const int cell = spec.grid_cell_index(r);
      if (dim == 3) {
        if (kind != MeasurementKind::kVectorField) {
          kind_mismatch("vector grid supports the vector_field branch only");
        }
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, n);
        h.block<3, 3>(0, 3 * cell) = c_sm;
        return h;
      }
      if (kind != MeasurementKind::kMagnitude) {
        kind_mismatch("scalar grid supports the magnitude branch only");
      }
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(1, n);
      h(0, cell) = 1.0;
      return h;
    }
    case BasisKind::kPolynomialCdf: {
      if (kind != MeasurementKind::kVectorField) {
        kind_mismatch("polynomial basis models the vector field");
      }
      const Eigen::Vector3d d = r - spec.polynomial().center_m;
      Eigen::MatrixXd phi_t(3, 8);
      phi_t.leftCols<3>().setIdentity();
      const auto& basis = gradient_basis();
      for (int i = 0; i < 5; ++i) phi_t.col(3 + i) = basis[i] * d;
      return c_sm * phi_t;
    }
    case BasisKind::kSpectralPotential: {
      if (!spec.domain().contains(r)) throw OutOfDomain("position outside spectral domain");
      if (kind == MeasurementKind::kPotentialGradient) {
        return -c_sm * spectral_gradients(spec, r);
      }
      if (kind == MeasurementKind::kMagnitude) {
        return spectral_values(spec, r).transpose();
      }
      kind_mismatch("spectral basis models a potential or a magnitude map");
    }
  }
  throw ValidationError("unreachable basis kind");
}

MapEvaluation eval_map(const MapPosterior& mp, MeasurementKind kind,
                       const Eigen::Vector3d& r, const UnitOrientation& q) {
  const Eigen::MatrixXd h = regressor(mp.spec, kind, r, q);
  Eigen::MatrixXd cov = h * mp.covariance * h.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return MapEvaluation{h * mp.mean, std::move(cov)};
}

MapPosterior spectral_prior(const BasisSpec& spec) {
  if (spec.kind() != BasisKind::kSpectralPotential) {
    kind_mismatch("spectral_prior requires a spectral_potential basis");
  }
  const auto& p = spec.spectral();
  const Box pb = spec.spectral_padded_box();
  const Eigen::Vector3d len = pb.extent();
  const int n_sine = p.modes.prod();
  Eigen::VectorXd diag(n_sine + 3);
  const double scale =
      p.sigma_se_tm * p.sigma_se_tm *
      std::pow(2.0 * kPi * p.ell_se_m * p.ell_se_m, 1.5);
  int j = 0;
  for (int i1 = 1; i1 <= p.modes[0]; ++i1) {
    for (int i2 = 1; i2 <= p.modes[1]; ++i2) {
      for (int i3 = 1; i3 <= p.modes[2]; ++i3, ++j) {
        const double lambda = std::pow(i1 * kPi / len.x(), 2) +
                              std::pow(i2 * kPi / len.y(), 2) +
                              std::pow(i3 * kPi / len.z(), 2);
        diag[j] = scale * std::exp(-0.5 * lambda * p.ell_se_m * p.ell_se_m);
      }
    }
  }
  diag.tail<3>().setConstant(p.sigma_lin * p.sigma_lin);
  return MapPosterior{spec, Eigen::VectorXd::Zero(n_sine + 3), diag.asDiagonal()};
}

MeasurementKind branch_for(const BasisSpec& spec, MeasurementKind channel) {
  if (channel == MeasurementKind::kMagnitude) {
    const bool scalar_basis =
        (spec.kind() == BasisKind::kGrid && spec.grid().value_dim == 1) ||
        spec.kind() == BasisKind::kSpectralPotential;
    if (!scalar_basis) kind_mismatch("magnitude readings need a scalar-valued basis");
    return MeasurementKind::kMagnitude;
  }
  switch (spec.kind()) {
    case BasisKind::kGrid:
      if (spec.grid().value_dim != 3) {
        kind_mismatch("vector readings need a vector-valued or potential basis");
      }
      return MeasurementKind::kVectorField;
    case BasisKind::kPolynomialCdf:
      return MeasurementKind::kVectorField;
    case BasisKind::kSpectralPotential:
      return MeasurementKind::kPotentialGradient;
  }
  throw ValidationError("unreachable basis kind");
}

}  // namespace magnav
