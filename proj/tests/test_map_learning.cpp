#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "magnav/map_learning.hpp"
#include "magnav/rng.hpp"

using namespace magnav;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Box unit_box() { return Box{Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(1, 1, 1)}; }

Eigen::Vector3d random_in_box(const Box& b, Rng& rng) {
  Eigen::Vector3d r;
  for (int k = 0; k < 3; ++k) {
    r[k] = b.min_m[k] + 0.05 + rng.uniform() * (b.max_m[k] - b.min_m[k] - 0.1);
  }
  return r;
}

UnitOrientation random_orientation(Rng& rng) {
  return UnitOrientation(rng.normal(), rng.normal(), rng.normal(), rng.normal());
}

LearningRecord random_record(const BasisSpec& spec, Rng& rng, bool allow_magnitude) {
  LearningRecord rec;
  rec.r = random_in_box(spec.domain(), rng);
  rec.q = random_orientation(rng);
  const bool magnitude = allow_magnitude && rng.uniform() < 0.3;
  rec.kind = magnitude ? MeasurementKind::kMagnitude : MeasurementKind::kVectorField;
  const int dim = magnitude ? 1 : 3;
  rec.y = Eigen::VectorXd(dim);
  for (int i = 0; i < dim; ++i) rec.y[i] = 1e-6 * rng.normal();
  const double std = 5e-8 * (0.5 + rng.uniform());
  rec.R = std * std * Eigen::MatrixXd::Identity(dim, dim);
  return rec;
}

MapPosterior scalar_two_cell_prior(double var0, double var1) {
  const BasisSpec spec(unit_box(), GridParams{Eigen::Vector3i(2, 1, 1), 1});
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  cov(0, 0) = var0;
  cov(1, 1) = var1;
  return MapPosterior{spec, Eigen::VectorXd::Zero(2), cov};
}

}  // namespace

TEST_CASE("scalar conjugate update: prior N(0,1), H=1, R=1, y=1") {
  MapPosterior prior = scalar_two_cell_prior(1.0, 1.0);
  LearningRecord rec;
  rec.r = Eigen::Vector3d(-0.5, 0.0, 0.0);  // cell 0
  rec.y = Eigen::VectorXd::Constant(1, 1.0);
  rec.R = Eigen::MatrixXd::Identity(1, 1);
  rec.kind = MeasurementKind::kMagnitude;
  const MapPosterior post = rls_update(prior, rec);
  CHECK(post.mean[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(post.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(post.mean[1] == 0.0);
  CHECK(post.covariance(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("a deterministic map absorbs nothing") {
  const BasisSpec spec(unit_box(), GridParams{Eigen::Vector3i(2, 1, 1), 1});
  MapPosterior prior = MapPosterior::deterministic(spec, Eigen::VectorXd::Ones(2));
  LearningRecord rec;
  rec.r = Eigen::Vector3d(-0.5, 0.0, 0.0);
  rec.y = Eigen::VectorXd::Constant(1, 5.0);
  rec.R = Eigen::MatrixXd::Identity(1, 1);
  rec.kind = MeasurementKind::kMagnitude;
  const MapPosterior post = rls_update(prior, rec);
  CHECK((post.mean - prior.mean).norm() == 0.0);
  CHECK(post.covariance.norm() == 0.0);
}

TEST_CASE("recursive updates equal the batch posterior on 200 mixed records") {
  const BasisSpec spec(unit_box(), SpectralPotentialParams{Eigen::Vector3i(2, 2, 2),
                                                           2e-6, 0.8, 1e-5});
  const MapPosterior prior = spectral_prior(spec);
  Rng rng(41);
  std::vector<LearningRecord> records;
  for (int i = 0; i < 200; ++i) records.push_back(random_record(spec, rng, true));

  MapPosterior recursive = prior;
  for (const auto& rec : records) recursive = rls_update(recursive, rec);
  const MapPosterior batch = batch_map(prior, records);

  CHECK((recursive.mean - batch.mean).norm() < 1e-8 * (1.0 + batch.mean.norm()));
  CHECK((recursive.covariance - batch.covariance).norm() <
        1e-8 * batch.covariance.norm());
}

TEST_CASE("rls preserves covariance symmetry and PSD and never grows") {
  const BasisSpec spec(unit_box(), SpectralPotentialParams{Eigen::Vector3i(2, 2, 1),
                                                           2e-6, 0.8, 1e-5});
  MapPosterior mp = spectral_prior(spec);
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const LearningRecord rec = random_record(spec, rng, false);
    const MapPosterior next = rls_update(mp, rec);
    CHECK((next.covariance - next.covariance.transpose()).norm() <
          1e-10 * (1.0 + next.covariance.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(next.covariance);
    CHECK(es.eigenvalues().minCoeff() > -1e-12 * next.covariance.norm());
    // P' <= P in the Loewner order: P - P' is PSD.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> diff(mp.covariance -
                                                        next.covariance);
    CHECK(diff.eigenvalues().minCoeff() > -1e-12 * mp.covariance.norm());
    mp = next;
  }
}

TEST_CASE("predictive variance at a measured location never exceeds the prior") {
  const BasisSpec spec(unit_box(), SpectralPotentialParams{Eigen::Vector3i(2, 2, 2),
                                                           2e-6, 0.8, 1e-5});
  const MapPosterior prior = spectral_prior(spec);
  Rng rng(43);
  for (int i = 0; i < 20; ++i) {
    const LearningRecord rec = random_record(spec, rng, false);
    const MapPosterior post = rls_update(prior, rec);
    const auto before = eval_map(prior, MeasurementKind::kPotentialGradient, rec.r, rec.q);
    const auto after = eval_map(post, MeasurementKind::kPotentialGradient, rec.r, rec.q);
    CHECK(after.covariance.trace() <= before.covariance.trace() + 1e-18);
  }
}

TEST_CASE("batch with no records returns the prior") {
  const MapPosterior prior = scalar_two_cell_prior(2.0, 3.0);
  const MapPosterior post = batch_map(prior, {});
  CHECK((post.mean - prior.mean).norm() == 0.0);
  CHECK((post.covariance - prior.covariance).norm() == 0.0);
}

TEST_CASE("batch of one record equals a single rls update") {
  const BasisSpec spec(unit_box(), SpectralPotentialParams{Eigen::Vector3i(2, 1, 1),
                                                           2e-6, 0.8, 1e-5});
  const MapPosterior prior = spectral_prior(spec);
  Rng rng(44);
  const LearningRecord rec = random_record(spec, rng, false);
  const MapPosterior a = rls_update(prior, rec);
  const MapPosterior b = batch_map(prior, {rec});
  CHECK((a.mean - b.mean).norm() < 1e-14 * (1.0 + b.mean.norm()));
  CHECK((a.covariance - b.covariance).norm() < 1e-14 * (1.0 + b.covariance.norm()));
}

TEST_CASE("batch posterior is order independent") {
  const BasisSpec spec(unit_box(), SpectralPotentialParams{Eigen::Vector3i(2, 2, 1),
                                                           2e-6, 0.8, 1e-5});
  const MapPosterior prior = spectral_prior(spec);
  Rng rng(45);
  std::vector<LearningRecord> records;
  for (int i = 0; i < 40; ++i) records.push_back(random_record(spec, rng, true));
  std::vector<LearningRecord> shuffled = records;
  for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i) {
    std::swap(shuffled[i], shuffled[rng.next_u64() % (i + 1)]);
  }
  const MapPosterior a = batch_map(prior, records);
  const MapPosterior b = batch_map(prior, shuffled);
  CHECK((a.mean - b.mean).norm() < 1e-10 * (1.0 + b.mean.norm()));
  CHECK((a.covariance - b.covariance).norm() < 1e-10 * (1.0 + b.covariance.norm()));
}

TEST_CASE("log marginal likelihood of a perfect deterministic fit") {
  const BasisSpec spec(unit_box(), GridParams{Eigen::Vector3i(2, 1, 1), 1});
  MapPosterior prior = MapPosterior::deterministic(spec, Eigen::VectorXd::Ones(2));
  const double sigma = 0.35;
  std::vector<LearningRecord> records;
  for (int i = 0; i < 7; ++i) {
    LearningRecord rec;
    rec.r = Eigen::Vector3d(i % 2 == 0 ? -0.5 : 0.5, 0.0, 0.0);
    rec.y = Eigen::VectorXd::Constant(1, 1.0);  // exactly H mu
    rec.R = sigma * sigma * Eigen::MatrixXd::Identity(1, 1);
    rec.kind = MeasurementKind::kMagnitude;
    records.push_back(rec);
  }
  const double expected = -0.5 * 7.0 * (kLog2Pi + 2.0 * std::log(sigma));
  CHECK(log_marginal_likelihood(prior, records) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("unvisited grid cells (all-zero columns) do not change the value") {
  // Records confined to cell 0 of a two-cell map; the cell-1 column of every
  // regressor is zero, so the marginal likelihood must equal the dense
  // single-cell computation regardless of the cell-1 prior.
  MapPosterior prior = scalar_two_cell_prior(0.7, 123.0);
  prior.mean << 0.4, -55.0;
  std::vector<LearningRecord> records;
  const double sigma = 0.2;
  const std::vector<double> ys = {0.3, 0.5, 0.1};
  for (double y : ys) {
    LearningRecord rec;
    rec.r = Eigen::Vector3d(-0.5, 0.0, 0.0);
    rec.y = Eigen::VectorXd::Constant(1, y);
    rec.R = sigma * sigma * Eigen::MatrixXd::Identity(1, 1);
    rec.kind = MeasurementKind::kMagnitude;
    records.push_back(rec);
  }
  // Dense oracle over the active weight only: y = w0 + e, w0 ~ N(0.4, 0.7).
  Eigen::Matrix3d cov = Eigen::Matrix3d::Constant(0.7);
  cov += sigma * sigma * Eigen::Matrix3d::Identity();
  Eigen::Vector3d resid;
  for (int i = 0; i < 3; ++i) resid[i] = ys[i] - 0.4;
  const double expected =
      -0.5 * (3.0 * kLog2Pi + std::log(cov.determinant()) +
              resid.dot(cov.inverse() * resid));
  CHECK(log_marginal_likelihood(prior, records) ==
        doctest::Approx(expected).epsilon(1e-10));

  MapPosterior other = scalar_two_cell_prior(0.7, 4.0);
  other.mean << 0.4, 17.0;
  CHECK(log_marginal_likelihood(prior, records) ==
        doctest::Approx(log_marginal_likelihood(other, records)).epsilon(1e-12));
}

TEST_CASE("log marginal likelihood matches a 2-weight quadrature oracle") {
  MapPosterior prior = scalar_two_cell_prior(0.8, 1.3);
  prior.mean << 0.2, -0.1;
  std::vector<LearningRecord> records;
  Rng rng(46);
  const double sigma = 0.5;
  for (int i = 0; i < 6; ++i) {
    LearningRecord rec;
    rec.r = Eigen::Vector3d(i % 2 == 0 ? -0.5 : 0.5, 0.0, 0.0);
    rec.y = Eigen::VectorXd::Constant(1, rng.normal());
    rec.R = sigma * sigma * Eigen::MatrixXd::Identity(1, 1);
    rec.kind = MeasurementKind::kMagnitude;
    records.push_back(rec);
  }

  // Trapezoid quadrature of  integral N(y; Hw, R) N(w; mu0, P0) dw  over a
  // wide grid; the two weights separate by cell but are integrated jointly.
  const int n_grid = 801;
  const double half_width = 10.0;
  auto axis = [&](double mean, double std, int i) {
    return mean + (-half_width + 2.0 * half_width * i / (n_grid - 1)) * std;
  };
  const double s0 = std::sqrt(prior.covariance(0, 0));
  const double s1 = std::sqrt(prior.covariance(1, 1));
  const double dw0 = 2.0 * half_width * s0 / (n_grid - 1);
  const double dw1 = 2.0 * half_width * s1 / (n_grid - 1);
  double integral = 0.0;
  for (int i = 0; i < n_grid; ++i) {
    const double w0 = axis(prior.mean[0], s0, i);
    double lik0 = 0.0;
    for (std::size_t k = 0; k < records.size(); k += 2) {
      const double d = records[k].y[0] - w0;
      lik0 += -0.5 * (kLog2Pi + 2.0 * std::log(sigma) + d * d / (sigma * sigma));
    }
    const double dp0 = (w0 - prior.mean[0]) / s0;
    lik0 += -0.5 * (kLog2Pi + 2.0 * std::log(s0) + dp0 * dp0);
    for (int j = 0; j < n_grid; ++j) {
      const double w1 = axis(prior.mean[1], s1, j);
      double lik = lik0;
      for (std::size_t k = 1; k < records.size(); k += 2) {
        const double d = records[k].y[0] - w1;
        lik += -0.5 * (kLog2Pi + 2.0 * std::log(sigma) + d * d / (sigma * sigma));
      }
      const double dp1 = (w1 - prior.mean[1]) / s1;
      lik += -0.5 * (kLog2Pi + 2.0 * std::log(s1) + dp1 * dp1);
      integral += std::exp(lik) * dw0 * dw1;
    }
  }
  CHECK(log_marginal_likelihood(prior, records) ==
        doctest::Approx(std::log(integral)).epsilon(1e-4));
}

TEST_CASE("aic with a single candidate returns it") {
  const BasisSpec only(unit_box(), PolynomialCdfParams{});
  Rng rng(47);
  std::vector<LearningRecord> records;
  for (int i = 0; i < 20; ++i) {
    LearningRecord rec;
    rec.r = random_in_box(unit_box(), rng);
    rec.q = UnitOrientation();
    rec.y = Eigen::Vector3d(1e-6 * rng.normal(), 1e-6 * rng.normal(),
                            1e-6 * rng.normal());
    rec.R = 1e-16 * Eigen::Matrix3d::Identity();
    rec.kind = MeasurementKind::kVectorField;
    records.push_back(rec);
  }
  CHECK(&select_order_aic({only}, records) != nullptr);
}

TEST_CASE("noiseless data fit exactly by the smaller model selects it") {
  // Linear field data: both the 8-weight polynomial and a 30-weight spectral
  // basis can fit it (the spectral one through its linear block), but the
  // polynomial pays a smaller complexity penalty.
  const BasisSpec small(unit_box(), PolynomialCdfParams{});
  const BasisSpec large(unit_box(), SpectralPotentialParams{Eigen::Vector3i(3, 3, 3),
                                                            2e-6, 0.8, 1e-5});
  Rng rng(48);
  Eigen::Matrix<double, 8, 1> w_true;
  for (int i = 0; i < 8; ++i) w_true[i] = 1e-6 * rng.normal();
  std::vector<LearningRecord> records;
  for (int i = 0; i < 40; ++i) {
    LearningRecord rec;
    rec.r = random_in_box(unit_box(), rng);
    rec.q = UnitOrientation();
    rec.y = Eigen::Vector3d(w_true.head<3>()) +
            gradient_from_params(w_true.tail<5>()) * rec.r;
    rec.R = 1e-16 * Eigen::Matrix3d::Identity();
    rec.kind = MeasurementKind::kVectorField;
    records.push_back(rec);
  }
  const BasisSpec& chosen = select_order_aic({small, large}, records);
  CHECK(chosen.kind() == BasisKind::kPolynomialCdf);
}

TEST_CASE("aic prefers the polynomial on linear-field data over 100 seeds") {
  const BasisSpec poly(unit_box(), PolynomialCdfParams{});
  const BasisSpec spectral(unit_box(), SpectralPotentialParams{Eigen::Vector3i(3, 3, 3),
                                                               2e-6, 0.8, 1e-5});
  int poly_wins = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    Eigen::Matrix<double, 8, 1> w_true;
    w_true.head<3>() = 5e-6 * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    for (int i = 3; i < 8; ++i) w_true[i] = 2e-6 * rng.normal();
    std::vector<LearningRecord> records;
    const double noise = 5e-8;
    for (int i = 0; i < 60; ++i) {
      LearningRecord rec;
      rec.r = random_in_box(unit_box(), rng);
      rec.q = UnitOrientation();
      rec.y = Eigen::Vector3d(w_true.head<3>()) +
              gradient_from_params(w_true.tail<5>()) * rec.r;
      for (int k = 0; k < 3; ++k) rec.y[k] += noise * rng.normal();
      rec.R = noise * noise * Eigen::Matrix3d::Identity();
      rec.kind = MeasurementKind::kVectorField;
      records.push_back(rec);
    }
    if (select_order_aic({poly, spectral}, records).kind() ==
        BasisKind::kPolynomialCdf) {
      ++poly_wins;
    }
  }
  CHECK(poly_wins >= 80);
}

TEST_CASE("marginal likelihood is invariant under record permutation") {
  const BasisSpec spec(unit_box(), SpectralPotentialParams{Eigen::Vector3i(2, 2, 1),
                                                           2e-6, 0.8, 1e-5});
  const MapPosterior prior = spectral_prior(spec);
  Rng rng(49);
  std::vector<LearningRecord> records;
  for (int i = 0; i < 25; ++i) records.push_back(random_record(spec, rng, true));
  std::vector<LearningRecord> reversed(records.rbegin(), records.rend());
  CHECK(log_marginal_likelihood(prior, records) ==
        doctest::Approx(log_marginal_likelihood(prior, reversed)).epsilon(1e-10));
}
