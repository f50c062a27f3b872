#pragma once

#include "rigidgraph/state.hpp"
#include "rigidgraph/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace rigidgraph {

// One triangle-triangle proximity event. Negative dist means penetration;
// normal points from body A toward body B.
struct ContactPair {
  int body_a = -1;
  int body_b = -1;
  int tri_a = -1;
  int tri_b = -1;
  Vec3 p_a = Vec3::Zero();
  Vec3 p_b = Vec3::Zero();
  double dist = 0.0;
  Vec3 normal = Vec3::UnitZ();
};

struct ContactSet {
  std::vector<ContactPair> pairs;
  bool frozen = false;
};

struct NearestResult {
  double dist = 0.0;  // negative = penetration depth
  Vec3 p_a = Vec3::Zero();
  Vec3 p_b = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // from A to B
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  void grow(const Vec3& p);
  Aabb inflated(double margin) const;
  bool overlaps(const Aabb& other) const;
};

// All body-id pairs whose d_eps/2-inflated world AABBs overlap.
std::vector<std::pair<int, int>> broadphase(const std::vector<BodySpec>& specs,
                                            const std::vector<RigidBodyState>& states,
                                            double d_eps);

// GJK distance between convex hulls; EPA penetration depth when they
// overlap. Throws NumericalFailure after 128 iterations without progress.
NearestResult nearest_points(const TriMesh& mesh_a, const RigidBodyState& state_a,
                             const TriMesh& mesh_b, const RigidBodyState& state_b);

// Exhaustive triangle-pair minimum distance; independent of GJK. Only
// meaningful for separated configurations.
NearestResult brute_force_nearest(const TriMesh& mesh_a, const RigidBodyState& state_a,
                                  const TriMesh& mesh_b, const RigidBodyState& state_b);

// Closest points between two triangles (vertex/edge/face case analysis).
double triangle_triangle_distance(const Vec3 tri_a[3], const Vec3 tri_b[3],
                                  Vec3& p_a, Vec3& p_b);

// All triangle pairs closer than d_eps across all broadphase body pairs.
// Penetrating body pairs contribute vertex-witness contacts with
// negative dist. Pairs come out sorted by key and the set is frozen.
ContactSet contact_pairs(const std::vector<BodySpec>& specs,
                         const std::vector<RigidBodyState>& states, double d_eps);

// 6x12 map from (vA, wA, vB, wB) to the stacked relative velocities of
// the witness points, second row the negation of the first.
Eigen::Matrix<double, 6, 12> contact_jacobian(const ContactPair& pair,
                                              const RigidBodyState& state_a,
                                              const RigidBodyState& state_b);

// J * H: the fixed-contact-set backward Jacobian of stacked witness
// points with respect to (x_A, q_A, x_B, q_B).
Eigen::Matrix<double, 6, 14> surrogate_gradient(const ContactPair& pair,
                                                const RigidBodyState& state_a,
                                                const RigidBodyState& state_b);

// One pair per line: ids, triangles, points, dist.
std::string dump_contact_set(const ContactSet& set);

}  // namespace rigidgraph
