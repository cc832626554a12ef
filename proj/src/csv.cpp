#include "magnav/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "magnav/errors.hpp"

namespace magnav {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double num(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ValidationError("bad numeric field: '" + s + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  return in;
}

}  // namespace

void write_truth_csv(const std::string& path, const std::vector<TruthRow>& rows) {
  auto out = open_out(path);
  out << "t,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,qw,qx,qy,qz\n";
  for (const auto& row : rows) {
    const auto& s = row.state;
    out << fmt(row.t_s) << ',' << fmt(s.r_m.x()) << ',' << fmt(s.r_m.y()) << ','
        << fmt(s.r_m.z()) << ',' << fmt(s.v_mps.x()) << ',' << fmt(s.v_mps.y()) << ','
        << fmt(s.v_mps.z()) << ',' << fmt(s.q.w()) << ',' << fmt(s.q.x()) << ','
        << fmt(s.q.y()) << ',' << fmt(s.q.z()) << '\n';
  }
}

std::vector<TruthRow> read_truth_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<TruthRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 11) throw ValidationError("truth CSV needs 11 columns");
    TruthRow row;
    row.t_s = num(f[0]);
    row.state.r_m = {num(f[1]), num(f[2]), num(f[3])};
    row.state.v_mps = {num(f[4]), num(f[5]), num(f[6])};
    row.state.q = UnitOrientation(num(f[7]), num(f[8]), num(f[9]), num(f[10]));
    rows.push_back(row);
  }
  return rows;
}

void write_estimate_csv(const std::string& path, const std::vector<EstimateRow>& rows) {
  auto out = open_out(path);
  out << "t,x_m,y_m,z_m,qw,qx,qy,qz,pxx,pxy,pxz,pyy,pyz,pzz,ess\n";
  for (const auto& row : rows) {
    out << fmt(row.t_s) << ',' << fmt(row.r_m.x()) << ',' << fmt(row.r_m.y()) << ','
        << fmt(row.r_m.z()) << ',' << fmt(row.q.w()) << ',' << fmt(row.q.x()) << ','
        << fmt(row.q.y()) << ',' << fmt(row.q.z()) << ',' << fmt(row.pos_cov(0, 0))
        << ',' << fmt(row.pos_cov(0, 1)) << ',' << fmt(row.pos_cov(0, 2)) << ','
        << fmt(row.pos_cov(1, 1)) << ',' << fmt(row.pos_cov(1, 2)) << ','
        << fmt(row.pos_cov(2, 2)) << ',' << fmt(row.ess) << '\n';
  }
}

std::vector<EstimateRow> read_estimate_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<EstimateRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 15) throw ValidationError("estimate CSV needs 15 columns");
    EstimateRow row;
    row.t_s = num(f[0]);
    row.r_m = {num(f[1]), num(f[2]), num(f[3])};
    row.q = UnitOrientation(num(f[4]), num(f[5]), num(f[6]), num(f[7]));
    const double pxx = num(f[8]), pxy = num(f[9]), pxz = num(f[10]);
    const double pyy = num(f[11]), pyz = num(f[12]), pzz = num(f[13]);
    row.pos_cov << pxx, pxy, pxz, pxy, pyy, pyz, pxz, pyz, pzz;
    row.ess = num(f[14]);
    rows.push_back(row);
  }
  return rows;
}

void write_measurements_csv(const std::string& path,
                            const std::vector<FieldSample>& samples) {
  auto out = open_out(path);
  out << "t,sensor_id,kind,y1,y2,y3\n";
  for (const auto& s : samples) {
    out << fmt(s.t_s) << ',' << s.sensor_id << ',';
    if (s.kind == MeasurementKind::kMagnitude) {
      out << "magnitude," << fmt(s.value[0]) << ",,\n";
    } else {
      out << "vector," << fmt(s.value[0]) << ',' << fmt(s.value[1]) << ','
          << fmt(s.value[2]) << '\n';
    }
  }
}

std::vector<FieldSample> read_measurements_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<FieldSample> samples;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6) throw ValidationError("measurement CSV needs 6 columns");
    FieldSample s;
    s.t_s = num(f[0]);
    s.sensor_id = static_cast<int>(num(f[1]));
    if (f[2] == "magnitude") {
      s.kind = MeasurementKind::kMagnitude;
      s.value = {num(f[3]), 0.0, 0.0};
    } else if (f[2] == "vector") {
      s.kind = MeasurementKind::kVectorField;
      s.value = {num(f[3]), num(f[4]), num(f[5])};
    } else {
      throw ValidationError("unknown measurement kind: " + f[2]);
    }
    samples.push_back(s);
  }
  return samples;
}

void write_odometry_csv(const std::string& path, const std::vector<OdometryRow>& rows) {
  auto out = open_out(path);
  out << "t,dt_s,vx_mps,vy_mps,vz_mps,wx_rps,wy_rps,wz_rps\n";
  for (const auto& row : rows) {
    const auto& u = row.u;
    out << fmt(row.t_s) << ',' << fmt(u.dt_s) << ',' << fmt(u.v_body_mps.x()) << ','
        << fmt(u.v_body_mps.y()) << ',' << fmt(u.v_body_mps.z()) << ','
        << fmt(u.omega_body_rps.x()) << ',' << fmt(u.omega_body_rps.y()) << ','
        << fmt(u.omega_body_rps.z()) << '\n';
  }
}

std::vector<OdometryRow> read_odometry_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<OdometryRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 8) throw ValidationError("odometry CSV needs 8 columns");
    OdometryRow row;
    row.t_s = num(f[0]);
    row.u.dt_s = num(f[1]);
    row.u.v_body_mps = {num(f[2]), num(f[3]), num(f[4])};
    row.u.omega_body_rps = {num(f[5]), num(f[6]), num(f[7])};
    rows.push_back(row);
  }
  return rows;
}

}  // namespace magnav
