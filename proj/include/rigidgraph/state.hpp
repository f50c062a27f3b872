#pragma once

#include "rigidgraph/mesh.hpp"
#include "rigidgraph/rotation.hpp"
#include "rigidgraph/types.hpp"

#include <string>
#include <vector>

namespace rigidgraph {

struct RigidBodyState {
  Vec3 x = Vec3::Zero();        // center of mass, world frame
  Quat q = quat_identity();     // scalar-first unit quaternion
  Vec3 v = Vec3::Zero();        // linear velocity
  Vec3 w = Vec3::Zero();        // angular velocity, world frame

  Mat3 rotation() const { return quat_to_rotmat(q); }
};

struct BodySpec {
  TriMesh mesh;
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();  // body frame, about the COM
  bool is_static = false;
  std::string mesh_path;  // provenance for trajectory headers, may be empty

  static BodySpec dynamic(TriMesh mesh, double mass);
  static BodySpec fixed(TriMesh mesh);
};

struct SceneState {
  std::vector<BodySpec> specs;
  std::vector<RigidBodyState> states;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double dt = 1.0 / 60.0;
};

std::vector<Vec3> world_vertices(const TriMesh& mesh, const RigidBodyState& state);

// Pose of one body at one step.
struct Pose {
  Vec3 x = Vec3::Zero();
  Quat q = quat_identity();
};

// Time-indexed per-body poses at fixed dt, plus the body specs.
struct Trajectory {
  std::vector<BodySpec> specs;
  double dt = 1.0 / 60.0;
  std::vector<std::vector<Pose>> frames;  // frames[t][body]

  int num_steps() const { return static_cast<int>(frames.size()); }
  int num_bodies() const { return static_cast<int>(specs.size()); }
};

// Trajectory text format:
//   body <id> mesh=<path> mass=<kg> static=<0|1>
//   dt=<s>
//   t <step> <id> x y z qw qx qy qz
// Saving writes each body's mesh next to the trajectory file when the
// spec has no mesh_path yet.
void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

}  // namespace rigidgraph
