#include "magnav/geometry.hpp"

#include <cmath>

namespace magnav {

void UnitOrientation::normalize() {
  wxyz_ /= wxyz_.norm();
  if (wxyz_[0] < 0.0) wxyz_ = -wxyz_;
}

UnitOrientation UnitOrientation::compose(const UnitOrientation& rhs) const {
  const double w1 = wxyz_[0];
  const Eigen::Vector3d v1 = wxyz_.tail<3>();
  const double w2 = rhs.wxyz_[0];
  const Eigen::Vector3d v2 = rhs.wxyz_.tail<3>();
  const double w = w1 * w2 - v1.dot(v2);
  const Eigen::Vector3d v = w1 * v2 + w2 * v1 + v1.cross(v2);
  return UnitOrientation(w, v.x(), v.y(), v.z());
}

Eigen::Matrix3d UnitOrientation::rotation_matrix() const {
  const double w = wxyz_[0];
  const Eigen::Vector3d v = wxyz_.tail<3>();
  const Eigen::Matrix3d vx = skew(v);
  return Eigen::Matrix3d::Identity() + 2.0 * w * vx + 2.0 * vx * vx;
}

Eigen::Vector3d rotate(const UnitOrientation& q, const Eigen::Vector3d& v) {
  // q v q^-1 expanded: v + 2 w (u x v) + 2 u x (u x v), u = vector part.
  const Eigen::Vector3d u = q.vec();
  const Eigen::Vector3d t = 2.0 * u.cross(v);
  return v + q.w() * t + u.cross(t);
}

UnitOrientation exp_map(const RotationTangent& t) {
  const double angle = t.norm();
  double scale;  // sin(angle/2) / angle
  if (angle < 1e-6) {
    scale = 0.5 - angle * angle / 48.0;
  } else {
    scale = std::sin(0.5 * angle) / angle;
  }
  const Eigen::Vector3d v = scale * t;
  return UnitOrientation(std::cos(0.5 * angle), v.x(), v.y(), v.z());
}

RotationTangent log_map(const UnitOrientation& q) {
  const double vn = q.vec().norm();
  if (vn < 1e-12) return RotationTangent::Zero();
  const double angle = 2.0 * std::atan2(vn, q.w());  // in [0, pi] since w >= 0
  return (angle / vn) * q.vec();
}

}  // namespace magnav
