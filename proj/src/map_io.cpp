#include "magnav/map_io.hpp"

#include <fstream>

#include "magnav/errors.hpp"

namespace magnav {

using nlohmann::json;

namespace {

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected 3-vector");
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

json basis_spec_to_json(const BasisSpec& spec) {
  json j;
  j["domain"] = {{"min_m", vec3_to_json(spec.domain().min_m)},
                 {"max_m", vec3_to_json(spec.domain().max_m)}};
  switch (spec.kind()) {
    case BasisKind::kGrid:
      j["kind"] = "grid";
      j["cells"] = {spec.grid().cells[0], spec.grid().cells[1], spec.grid().cells[2]};
      j["value_dim"] = spec.grid().value_dim;
      break;
    case BasisKind::kPolynomialCdf:
      j["kind"] = "polynomial_cdf";
      j["center_m"] = vec3_to_json(spec.polynomial().center_m);
      break;
    case BasisKind::kSpectralPotential: {
      const auto& p = spec.spectral();
      j["kind"] = "spectral_potential";
      j["modes"] = {p.modes[0], p.modes[1], p.modes[2]};
      j["sigma_se_tm"] = p.sigma_se_tm;
      j["ell_se_m"] = p.ell_se_m;
      j["sigma_lin"] = p.sigma_lin;
      break;
    }
  }
  return j;
}

BasisSpec basis_spec_from_json(const json& j) {
  Box domain;
  domain.min_m = vec3_from_json(j.at("domain").at("min_m"));
  domain.max_m = vec3_from_json(j.at("domain").at("max_m"));
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "grid") {
    GridParams p;
    const auto& cells = j.at("cells");
    p.cells = Eigen::Vector3i(cells.at(0).get<int>(), cells.at(1).get<int>(),
                              cells.at(2).get<int>());
    p.value_dim = j.value("value_dim", 3);
    return BasisSpec(domain, p);
  }
  if (kind == "polynomial_cdf") {
    PolynomialCdfParams p;
    if (j.contains("center_m")) p.center_m = vec3_from_json(j.at("center_m"));
    return BasisSpec(domain, p);
  }
  if (kind == "spectral_potential") {
    SpectralPotentialParams p;
    const auto& modes = j.at("modes");
    p.modes = Eigen::Vector3i(modes.at(0).get<int>(), modes.at(1).get<int>(),
                              modes.at(2).get<int>());
    p.sigma_se_tm = j.at("sigma_se_tm").get<double>();
    p.ell_se_m = j.at("ell_se_m").get<double>();
    p.sigma_lin = j.value("sigma_lin", 0.0);
    return BasisSpec(domain, p);
  }
  throw ValidationError("unknown basis kind: " + kind);
}

json map_to_json(const MapPosterior& mp) {
  json j;
  j["spec"] = basis_spec_to_json(mp.spec);
  j["mean"] = std::vector<double>(mp.mean.data(), mp.mean.data() + mp.mean.size());
  if (!mp.covariance.isZero(0.0)) {
    std::vector<double> cov;
    cov.reserve(mp.covariance.size());
    for (int r = 0; r < mp.covariance.rows(); ++r) {
      for (int c = 0; c < mp.covariance.cols(); ++c) cov.push_back(mp.covariance(r, c));
    }
    j["covariance"] = cov;
  }
  return j;
}

MapPosterior map_from_json(const json& j) {
  BasisSpec spec = basis_spec_from_json(j.at("spec"));
  const int n = spec.weight_count();
  const auto mean_vec = j.at("mean").get<std::vector<double>>();
  if (static_cast<int>(mean_vec.size()) != n) {
    throw ValidationError("map mean length inconsistent with basis");
  }
  Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(mean_vec.data(), n);
  if (!j.contains("covariance")) {
    return MapPosterior::deterministic(std::move(spec), std::move(mean));
  }
  const auto cov_vec = j.at("covariance").get<std::vector<double>>();
  if (static_cast<int>(cov_vec.size()) != n * n) {
    throw ValidationError("map covariance size inconsistent with basis");
  }
  Eigen::MatrixXd cov(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) cov(r, c) = cov_vec[r * n + c];
  }
  return MapPosterior{std::move(spec), std::move(mean), std::move(cov)};
}

void save_map(const MapPosterior& mp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << map_to_json(mp).dump(2) << "\n";
}

MapPosterior load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open map file: " + path);
  json j;
  in >> j;
  return map_from_json(j);
}

json calibration_to_json(const CalibrationResult& cal) {
  json j;
  std::vector<double> a;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(cal.a_hat(r, c));
  }
  j["A"] = a;
  j["b"] = vec3_to_json(cal.b_hat);
  j["residual"] = cal.residual;
  return j;
}

}  // namespace magnav
