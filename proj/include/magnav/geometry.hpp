#pragma once

#include <Eigen/Dense>

namespace magnav {

// Orientation convention, used by every module:
//  - quaternions are scalar-first (w, x, y, z), unit norm, w >= 0;
//  - q is the sensor-to-map (body-to-world) orientation, i.e. rotate(q, v)
//    takes a sensor-frame vector into the map frame;
//  - the map-to-sensor matrix of the measurement model is therefore
//    rotation_matrix(q).transpose();
//  - orientation errors are right-multiplicative, q = qbar * exp_map(eps),
//    with eps expressed in the body frame.

// Rotation tangent vector (axis * angle, radians). log_map canonicalizes to
// magnitude <= pi.
using RotationTangent = Eigen::Vector3d;

class UnitOrientation {
public:
  // Identity orientation.
  UnitOrientation() : wxyz_(1.0, 0.0, 0.0, 0.0) {}

  // Normalizes and resolves the double cover (w >= 0).
  UnitOrientation(double w, double x, double y, double z) : wxyz_(w, x, y, z) {
    normalize();
  }

  explicit UnitOrientation(const Eigen::Vector4d& wxyz) : wxyz_(wxyz) {
    normalize();
  }

  double w() const { return wxyz_[0]; }
  double x() const { return wxyz_[1]; }
  double y() const { return wxyz_[2]; }
  double z() const { return wxyz_[3]; }
  const Eigen::Vector4d& coeffs() const { return wxyz_; }
  Eigen::Vector3d vec() const { return wxyz_.tail<3>(); }

  UnitOrientation conjugate() const {
    return UnitOrientation(wxyz_[0], -wxyz_[1], -wxyz_[2], -wxyz_[3]);
  }

  // Hamilton product this * rhs.
  UnitOrientation compose(const UnitOrientation& rhs) const;

  // R(q): applies the rotation encoded by q (sensor frame -> map frame).
  Eigen::Matrix3d rotation_matrix() const;

  bool approx_equal(const UnitOrientation& other, double tol = 1e-12) const {
    return (wxyz_ - other.wxyz_).norm() < tol;
  }

private:
  void normalize();

  Eigen::Vector4d wxyz_;  // (w, x, y, z)
};

// C^m_s(q) * v: sensor-frame vector expressed in the map frame.
Eigen::Vector3d rotate(const UnitOrientation& q, const Eigen::Vector3d& v);

// C^s_m(q) * v: map-frame vector expressed in the sensor frame.
inline Eigen::Vector3d rotate_inverse(const UnitOrientation& q,
                                      const Eigen::Vector3d& v) {
  return rotate(q.conjugate(), v);
}

// exp: tangent -> orientation. Series branch below 1e-6 rad.
UnitOrientation exp_map(const RotationTangent& t);

// log: orientation -> tangent, magnitude <= pi (w >= 0 canonicalization).
RotationTangent log_map(const UnitOrientation& q);

// qbar (+) eps = qbar * exp_map(eps).
inline UnitOrientation boxplus(const UnitOrientation& qbar,
                               const RotationTangent& eps) {
  return qbar.compose(exp_map(eps));
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& a) {
  Eigen::Matrix3d s;
  s << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return s;
}

}  // namespace magnav
