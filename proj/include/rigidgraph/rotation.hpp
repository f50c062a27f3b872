#pragma once

#include "rigidgraph/types.hpp"

namespace rigidgraph {

// Rotation matrix from a scalar-first unit quaternion.
// Throws InvalidInput if |q| deviates from 1 by more than 1e-6.
Mat3 quat_to_rotmat(const Quat& q);

// Inverse of quat_to_rotmat (positive-w branch).
Quat rotmat_to_quat(const Mat3& R);

// Hamilton product, scalar-first.
Quat quat_mul(const Quat& a, const Quat& b);

Quat quat_conjugate(const Quat& q);

// Quaternion for a rotation of `angle` radians about `axis`.
Quat quat_from_axis_angle(const Vec3& axis, double angle);

inline Quat quat_identity() { return Quat(1.0, 0.0, 0.0, 0.0); }

// skew(r) * u == r.cross(u).
Mat3 skew(const Vec3& r);

// 3x4 matrix G(q) with world-frame angular velocity w = 2 G(q) qdot.
Eigen::Matrix<double, 3, 4> quat_rate_matrix(const Quat& q);

// Block-diagonal 12x14 map from stacked generalized-position rates
// (xdotA, qdotA, xdotB, qdotB) to generalized velocities (vA, wA, vB, wB).
Eigen::Matrix<double, 12, 14> kinematic_map_H(const Quat& qA, const Quat& qB);

// arccos((trace(R1^T R2) - 1)/2), clamped into [0, pi].
double geodesic_angle(const Mat3& R1, const Mat3& R2);

}  // namespace rigidgraph
