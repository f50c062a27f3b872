#include "rigidgraph/rotation.hpp"

#include <algorithm>
#include <cmath>

namespace rigidgraph {

Mat3 quat_to_rotmat(const Quat& q) {
  const double n = q.norm();
  if (std::abs(n - 1.0) > 1e-6) {
    throw InvalidInput("quat_to_rotmat: non-unit quaternion, |q|=" + std::to_string(n));
  }
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Quat rotmat_to_quat(const Mat3& R) {
  Eigen::Quaterniond eq(R);
  if (eq.w() < 0.0) eq.coeffs() *= -1.0;
  return Quat(eq.w(), eq.x(), eq.y(), eq.z());
}

Quat quat_mul(const Quat& a, const Quat& b) {
  return Quat(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Quat quat_conjugate(const Quat& q) { return Quat(q[0], -q[1], -q[2], -q[3]); }

Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double h = 0.5 * angle;
  return Quat(std::cos(h), a.x() * std::sin(h), a.y() * std::sin(h), a.z() * std::sin(h));
}

Mat3 skew(const Vec3& r) {
  Mat3 S;
  S << 0, -r.z(), r.y(),
       r.z(), 0, -r.x(),
       -r.y(), r.x(), 0;
  return S;
}

Eigen::Matrix<double, 3, 4> quat_rate_matrix(const Quat& q) {
  // w = 2 G(q) qdot with G = [-x w -z y; -y z w -x; -z -y x w] for the
  // world-frame convention q_dot = 0.5 * (0, w) (x) q.
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix<double, 3, 4> G;
  G << -x, w, -z, y,
       -y, z, w, -x,
       -z, -y, x, w;
  return G;
}

Eigen::Matrix<double, 12, 14> kinematic_map_H(const Quat& qA, const Quat& qB) {
  Eigen::Matrix<double, 12, 14> H = Eigen::Matrix<double, 12, 14>::Zero();
  H.block<3, 3>(0, 0).setIdentity();
  H.block<3, 4>(3, 3) = 2.0 * quat_rate_matrix(qA);
  H.block<3, 3>(6, 7).setIdentity();
  H.block<3, 4>(9, 10) = 2.0 * quat_rate_matrix(qB);
  return H;
}

double geodesic_angle(const Mat3& R1, const Mat3& R2) {
  const double c = ((R1.transpose() * R2).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace rigidgraph
