#pragma once

#include "rigidgraph/state.hpp"
#include "rigidgraph/teacher.hpp"

#include <random>
#include <string>
#include <vector>

namespace rigidgraph {

struct ScalingSpec {
  int n_trajectories = 10;
  int n_objects_min = 2;
  int n_objects_max = 4;
  double edge_length_min = 0.04;
  double edge_length_max = 0.08;
  double mass_min = 0.05;
  double mass_max = 0.2;
  double initial_speed_min = 0.3;
  double initial_speed_max = 1.0;
  Vec2 region_min = Vec2(-0.3, -0.3);  // placement box on the plane
  Vec2 region_max = Vec2(0.3, 0.3);
  int steps_per_trajectory = 20;
  double gravity_z = -9.81;
  unsigned long seed = 0;

  void validate() const;
};

enum class Provenance { scaled, augmented, real_substitute };

const char* provenance_name(Provenance p);

struct Dataset {
  std::vector<Trajectory> trajectories;
  Provenance provenance = Provenance::scaled;
  ContactParams params_used;
};

// Random scene on a static ground plane: N cubes with sampled edge and
// mass, placed by rejection sampling so nothing interpenetrates; the
// first cube is the pusher and gets a sampled planar velocity.
SceneState sample_scene(const ScalingSpec& spec, std::mt19937_64& rng);

// Teacher rollouts from sampled scenes. Rollouts that never activate a
// contact are resampled (up to 10 retries each).
Dataset scale_dataset(const ScalingSpec& spec, const ContactParams& params);

// Copies of each base trajectory rotated about the world z-axis through
// the scene centroid, with angles evenly spaced on [0, 2*pi).
Dataset augment_rotate_z(const Dataset& base, int n_copies);

// Layout: <dir>/<provenance>/<index>.traj plus a key=value manifest.
void save_dataset(const Dataset& dataset, const std::string& dir, const ScalingSpec* spec = nullptr);
Dataset load_dataset(const std::string& dir);

}  // namespace rigidgraph
