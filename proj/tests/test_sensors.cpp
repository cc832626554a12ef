#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "magnav/rng.hpp"
#include "magnav/sensors.hpp"

using namespace magnav;

namespace {

TruthField background_only() {
  return TruthField(Eigen::Vector3d(0, 0, 50e-6), {});
}

ArrayGeometry planar_array(int nx, int ny, double pitch) {
  ArrayGeometry g;
  const double cx = 0.5 * (nx - 1) * pitch;
  const double cy = 0.5 * (ny - 1) * pitch;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      g.offsets_m.emplace_back(i * pitch - cx, j * pitch - cy, 0.0);
    }
  }
  return g;
}

// Deterministic well-spread unit directions.
Eigen::Vector3d fibonacci_direction(int i, int n) {
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double z = 1.0 - 2.0 * (i + 0.5) / n;
  const double radius = std::sqrt(1.0 - z * z);
  const double theta = 2.0 * M_PI * i / golden;
  return {radius * std::cos(theta), radius * std::sin(theta), z};
}

UnitOrientation orientation_toward(const Eigen::Vector3d& axis, double roll) {
  // Unit quaternion rotating the z-axis onto `axis`, then rolled about it.
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d v = z.cross(axis);
  const double s = v.norm();
  const double c = z.dot(axis);
  UnitOrientation tilt;
  if (s > 1e-12) {
    tilt = exp_map(std::atan2(s, c) * v / s);
  } else if (c < 0.0) {
    tilt = exp_map(Eigen::Vector3d(M_PI, 0, 0));
  }
  return tilt.compose(exp_map(Eigen::Vector3d(0, 0, roll)));
}

}  // namespace

TEST_CASE("ideal vector sensor reproduces the field") {
  const TruthField f = background_only();
  SensorModel sm;
  sm.noise_std_t = 0.0;
  const auto samples = synthesize(f, Eigen::Vector3d::Zero(), UnitOrientation(), sm,
                                  std::nullopt, 0.0, 1);
  REQUIRE(samples.size() == 1);
  CHECK((samples[0].value - Eigen::Vector3d(0, 0, 50e-6)).norm() == 0.0);
}

TEST_CASE("ideal magnitude sensor reads the norm") {
  const TruthField f = background_only();
  SensorModel sm;
  sm.kind = MeasurementKind::kMagnitude;
  const auto samples = synthesize(f, Eigen::Vector3d::Zero(), UnitOrientation(), sm,
                                  std::nullopt, 0.0, 1);
  CHECK(samples[0].value[0] == doctest::Approx(50e-6).epsilon(1e-15));
}

TEST_CASE("magnitude readings are orientation invariant") {
  const TruthField f = background_only();
  SensorModel sm;
  sm.kind = MeasurementKind::kMagnitude;
  Rng rng(51);
  for (int i = 0; i < 10; ++i) {
    const UnitOrientation q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const auto a = synthesize(f, {1, 2, 0.5}, q, sm, std::nullopt, 3.0, 9);
    const auto b =
        synthesize(f, {1, 2, 0.5}, UnitOrientation(), sm, std::nullopt, 3.0, 9);
    CHECK(a[0].value[0] == b[0].value[0]);  // same noise stream, same position
  }
}

TEST_CASE("vector readings apply the affine model in the sensor frame") {
  const TruthField f = background_only();
  SensorModel sm;
  sm.affine_a << 1.1, 0.02, 0.0, 0.02, 0.95, 0.01, 0.0, 0.01, 1.05;
  sm.offset_b_t = Eigen::Vector3d(3e-6, -2e-6, 1e-6);
  const UnitOrientation q = exp_map(Eigen::Vector3d(0.1, -0.2, 0.7));
  const auto samples = synthesize(f, {0.4, 0.0, 0.0}, q, sm, std::nullopt, 0.0, 2);
  const Eigen::Vector3d expected =
      sm.affine_a * (q.rotation_matrix().transpose() * Eigen::Vector3d(0, 0, 50e-6)) +
      sm.offset_b_t;
  CHECK((samples[0].value - expected).norm() < 1e-18);
}

TEST_CASE("array sensors sample at rotated offsets") {
  // A dipole far on +x makes the field position dependent; check that sensor
  // placement honors r + C(q) d.
  TruthField f(Eigen::Vector3d::Zero(),
               {{Eigen::Vector3d(2, 0, 0), Eigen::Vector3d(0, 0, 3)}});
  ArrayGeometry geom{{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.2, 0, 0)}};
  const UnitOrientation q = exp_map(Eigen::Vector3d(0, 0, M_PI / 2));
  SensorModel sm;
  const auto samples = synthesize(f, Eigen::Vector3d::Zero(), q, sm, geom, 0.0, 3);
  const Eigen::Vector3d world1 = q.rotation_matrix() * Eigen::Vector3d(0.2, 0, 0);
  const Eigen::Vector3d expected1 =
      q.rotation_matrix().transpose() * f.eval_field(world1);
  CHECK((samples[1].value - expected1).norm() < 1e-18);
  CHECK(samples[0].sensor_id == 0);
  CHECK(samples[1].sensor_id == 1);
}

TEST_CASE("noise streams are reproducible and independent per sensor") {
  const TruthField f = background_only();
  SensorModel sm;
  sm.noise_std_t = 1e-7;
  ArrayGeometry geom{{Eigen::Vector3d::Zero(), Eigen::Vector3d(0.1, 0, 0)}};
  const auto a = synthesize(f, {0, 0, 0}, UnitOrientation(), sm, geom, 1.5, 77);
  const auto b = synthesize(f, {0, 0, 0}, UnitOrientation(), sm, geom, 1.5, 77);
  CHECK((a[0].value - b[0].value).norm() == 0.0);
  CHECK((a[1].value - b[1].value).norm() == 0.0);
  CHECK((a[0].value - a[1].value).norm() > 0.0);
  const auto c = synthesize(f, {0, 0, 0}, UnitOrientation(), sm, geom, 1.5, 78);
  CHECK((a[0].value - c[0].value).norm() > 0.0);
}

TEST_CASE("sample mean of many draws matches the truth within 4 sigma") {
  const TruthField f = background_only();
  SensorModel sm;
  sm.noise_std_t = 1e-7;
  const int n = 100000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    sum += synthesize(f, {0, 0, 0}, UnitOrientation(), sm, std::nullopt,
                      static_cast<double>(i), 5)[0]
               .value;
  }
  const Eigen::Vector3d mean = sum / n;
  const double bound = 4.0 * sm.noise_std_t / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(mean[k] - (k == 2 ? 50e-6 : 0.0)) < bound);
  }
}

TEST_CASE("samples already on a centered sphere calibrate to scaled identity") {
  std::vector<FieldSample> samples;
  const double radius = 48e-6;
  for (int i = 0; i < 200; ++i) {
    FieldSample s;
    s.value = radius * fibonacci_direction(i, 200);
    samples.push_back(s);
  }
  const CalibrationResult cal = ellipsoid_calibrate(samples);
  CHECK((cal.a_hat - radius * Eigen::Matrix3d::Identity()).norm() < 1e-8 * radius);
  CHECK(cal.b_hat.norm() < 1e-8);
  CHECK(cal.residual < 1e-10);
}

TEST_CASE("noiseless affine corruption is recovered exactly") {
  Eigen::Matrix3d a_true;
  a_true << 1.2, 0.1, -0.05, 0.1, 0.9, 0.08, -0.05, 0.08, 1.1;  // spd, cond < 3
  const Eigen::Vector3d b_true(6e-6, -4e-6, 2e-6);
  const double field = 50e-6;
  std::vector<FieldSample> samples;
  for (int i = 0; i < 500; ++i) {
    FieldSample s;
    s.value = a_true * (field * fibonacci_direction(i, 500)) + b_true;
    samples.push_back(s);
  }
  const CalibrationResult cal = ellipsoid_calibrate(samples, field);
  CHECK((cal.a_hat - a_true).norm() < 1e-6);
  CHECK((cal.b_hat - b_true).norm() < 1e-9);
}

TEST_CASE("noisy calibration recovers the offset and shrinks the norm spread") {
  Eigen::Matrix3d a_true;
  a_true << 1.15, 0.05, 0.0, 0.05, 0.93, 0.04, 0.0, 0.04, 1.02;
  const Eigen::Vector3d b_true(8e-6, 3e-6, -5e-6);
  const double field = 50e-6;
  Rng rng(52);
  std::vector<FieldSample> samples;
  double raw_mean = 0.0, raw_sq = 0.0;
  for (int i = 0; i < 2000; ++i) {
    FieldSample s;
    s.value = a_true * (field * fibonacci_direction(i, 2000)) + b_true;
    for (int k = 0; k < 3; ++k) s.value[k] += 50e-9 * rng.normal();
    samples.push_back(s);
    const double n = s.value.norm();
    raw_mean += n;
    raw_sq += n * n;
  }
  raw_mean /= samples.size();
  const double raw_spread =
      std::sqrt(raw_sq / samples.size() - raw_mean * raw_mean) / raw_mean;

  const CalibrationResult cal = ellipsoid_calibrate(samples, field);
  CHECK((cal.b_hat - b_true).norm() < 0.5e-6);
  CHECK(cal.residual < 0.005);
  CHECK(cal.residual < raw_spread);
}

TEST_CASE("degenerate orientation coverage is rejected") {
  // All samples along one great circle: the quadric is unidentifiable.
  std::vector<FieldSample> samples;
  for (int i = 0; i < 100; ++i) {
    const double a = 2.0 * M_PI * i / 100.0;
    FieldSample s;
    s.value = 50e-6 * Eigen::Vector3d(std::cos(a), std::sin(a), 0.0);
    samples.push_back(s);
  }
  CHECK_THROWS_AS(ellipsoid_calibrate(samples), DegenerateFit);
}

TEST_CASE("uniform field gives zero gradient and the field as b0") {
  const ArrayGeometry geom = planar_array(3, 3, 0.05);
  std::vector<FieldSample> samples;
  const Eigen::Vector3d b(12e-6, -7e-6, 44e-6);
  for (int i = 0; i < geom.size(); ++i) {
    FieldSample s;
    s.sensor_id = i;
    s.value = b;
    samples.push_back(s);
  }
  const auto est = estimate_jacobian(samples, geom, 1e-16 * Eigen::Matrix3d::Identity());
  CHECK((est.b0_t - b).norm() < 1e-12);
  CHECK(est.g_tpm.norm() < 1e-9);
}

TEST_CASE("a field inside the model class is recovered exactly") {
  const ArrayGeometry geom = planar_array(3, 4, 0.04);
  Rng rng(53);
  Eigen::Matrix<double, 5, 1> g5;
  for (int i = 0; i < 5; ++i) g5[i] = 4e-6 * rng.normal();
  const Eigen::Matrix3d g = gradient_from_params(g5);
  const Eigen::Vector3d b0(20e-6, 5e-6, 40e-6);
  std::vector<FieldSample> samples;
  for (int i = 0; i < geom.size(); ++i) {
    FieldSample s;
    s.sensor_id = i;
    s.value = b0 + g * geom.offsets_m[i];
    samples.push_back(s);
  }
  const auto est = estimate_jacobian(samples, geom, 1e-16 * Eigen::Matrix3d::Identity());
  CHECK((est.b0_t - b0).norm() < 1e-10);
  CHECK((est.g_tpm - g).norm() < 1e-10);
}

TEST_CASE("planar array recovers the dipole jacobian within 5 percent") {
  const ArrayGeometry geom = planar_array(5, 6, 0.03);
  TruthField f(Eigen::Vector3d(0, 0, 45e-6),
               {{Eigen::Vector3d(0, 0, 2.0), Eigen::Vector3d(300, 100, 200)}});
  std::vector<FieldSample> samples;
  for (int i = 0; i < geom.size(); ++i) {
    FieldSample s;
    s.sensor_id = i;
    s.value = f.eval_field(geom.offsets_m[i]);
    samples.push_back(s);
  }
  const auto est = estimate_jacobian(samples, geom, 1e-16 * Eigen::Matrix3d::Identity());
  const Eigen::Matrix3d truth = f.eval_jacobian(Eigen::Vector3d::Zero());
  CHECK((est.g_tpm - truth).norm() < 0.05 * truth.norm());
  CHECK((est.g_tpm - est.g_tpm.transpose()).norm() == 0.0);
  CHECK(est.g_tpm.trace() == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("without the symmetry and trace constraints a planar fit is rank deficient") {
  // General first-order model b0 + G d with unconstrained 3x3 G: 12 columns.
  // A planar (z = 0) array never varies d_z, so the G(:,z) columns vanish.
  const ArrayGeometry geom = planar_array(4, 4, 0.05);
  Eigen::MatrixXd h(3 * geom.size(), 12);
  h.setZero();
  for (int i = 0; i < geom.size(); ++i) {
    h.block<3, 3>(3 * i, 0).setIdentity();
    for (int c = 0; c < 3; ++c) {
      for (int r = 0; r < 3; ++r) {
        h(3 * i + r, 3 + 3 * r + c) = geom.offsets_m[i][c];
      }
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(h);
  qr.setThreshold(1e-10);
  CHECK(qr.rank() < 12);
  CHECK(geom.planar());
}

TEST_CASE("collinear offsets cannot identify the 8 parameters") {
  ArrayGeometry geom;
  for (int i = 0; i < 5; ++i) geom.offsets_m.emplace_back(0.03 * i, 0.0, 0.0);
  std::vector<FieldSample> samples(5);
  for (int i = 0; i < 5; ++i) samples[i].sensor_id = i;
  CHECK_THROWS_AS(
      estimate_jacobian(samples, geom, 1e-16 * Eigen::Matrix3d::Identity()),
      RankDeficient);
}

TEST_CASE("array samples must share a timestamp") {
  const ArrayGeometry geom = planar_array(2, 2, 0.05);
  std::vector<FieldSample> samples(4);
  for (int i = 0; i < 4; ++i) samples[i].sensor_id = i;
  samples[2].t_s = 0.5;
  CHECK_THROWS_AS(
      estimate_jacobian(samples, geom, 1e-16 * Eigen::Matrix3d::Identity()),
      TimestampMismatch);
}
