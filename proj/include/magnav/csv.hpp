#pragma once

#include <string>
#include <vector>

#include "magnav/nav_state.hpp"
#include "magnav/sensors.hpp"

namespace magnav {

// Truth log row; serialized as
// t,x_m,y_m,z_m,vx_mps,vy_mps,vz_mps,qw,qx,qy,qz.
struct TruthRow {
  double t_s;
  NavState state;
};

// Estimate log row; serialized as
// t,x_m,y_m,z_m,qw,qx,qy,qz,pxx,pxy,pxz,pyy,pyz,pzz,ess.
struct EstimateRow {
  double t_s;
  Eigen::Vector3d r_m;
  UnitOrientation q;
  Eigen::Matrix3d pos_cov;
  double ess;
};

// Odometry log row; serialized as t,dt_s,vx,vy,vz,wx,wy,wz (body frame).
struct OdometryRow {
  double t_s;
  OdometryInput u;
};

void write_truth_csv(const std::string& path, const std::vector<TruthRow>& rows);
std::vector<TruthRow> read_truth_csv(const std::string& path);

void write_estimate_csv(const std::string& path, const std::vector<EstimateRow>& rows);
std::vector<EstimateRow> read_estimate_csv(const std::string& path);

// Measurement CSV: t,sensor_id,kind,y1,y2,y3 with y2,y3 empty for magnitude.
void write_measurements_csv(const std::string& path,
                            const std::vector<FieldSample>& samples);
std::vector<FieldSample> read_measurements_csv(const std::string& path);

void write_odometry_csv(const std::string& path, const std::vector<OdometryRow>& rows);
std::vector<OdometryRow> read_odometry_csv(const std::string& path);

}  // namespace magnav
