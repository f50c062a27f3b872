#pragma once

#include "rigidgraph/cmaes.hpp"
#include "rigidgraph/state.hpp"
#include "rigidgraph/teacher.hpp"

#include <vector>

namespace rigidgraph {

struct IdentDataset {
  std::vector<Trajectory> demos;  // shared specs and dt
  VecX weights;                   // per-body positional scale (m), > 0
};

struct ParamBounds {
  ContactParams lower;
  ContactParams upper;

  // Documented optimization ranges for every contact parameter.
  static ParamBounds defaults();
};

struct VelocitySample {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();  // world frame
};

// Backward finite differences of the stored poses: v_t = (x_t - x_{t-1})/dt
// and w_t the axis-angle of the world-frame relative rotation over dt.
// The first step copies the second. Result is indexed [step][body].
std::vector<std::vector<VelocitySample>> finite_diff_velocities(const Trajectory& traj);

// Pose discrepancy summed from step 1: (1/w_i)*|dx| + |geodesic angle|
// per body per step. `sim` is expected to be seeded with `real`'s step 0.
double trajectory_loss(const Trajectory& real, const Trajectory& sim, const VecX& weights);

struct IdentResult {
  ContactParams theta;
  double loss = 0.0;
  std::vector<double> history;  // best loss after each generation
};

// Fit contact parameters so that rollouts from each demo's first frame
// reproduce the demo poses, minimizing the summed trajectory loss.
IdentResult identify(const IdentDataset& dataset, const ParamBounds& bounds, int budget,
                     unsigned long seed);

}  // namespace rigidgraph
