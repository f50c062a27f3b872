#pragma once

#include "rigidgraph/collide.hpp"
#include "rigidgraph/state.hpp"

#include <array>

namespace rigidgraph {

// Identification target: impedance 5-tuple, spring-damper pair, friction.
struct ContactParams {
  double d0 = 0.925;
  double d_width = 0.97;
  double width = 0.008;     // m
  double midpoint = 0.05;
  double power = 2.0;
  double time_constant = 0.02;  // s
  double damping_ratio = 1.0;
  double mu = 0.3;

  static constexpr int kDim = 8;
  std::array<double, kDim> as_array() const {
    return {d0, d_width, width, midpoint, power, time_constant, damping_ratio, mu};
  }
  static ContactParams from_array(const std::array<double, kDim>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
  }
  static const char* field_name(int i);
};

// Constraint-violation impedance: d0 at zero violation, saturating at
// d_width for violation >= width, C1 two-piece power curve in between.
double impedance(double violation, const ContactParams& params);

struct ContactWrench {
  Vec6 on_a = Vec6::Zero();  // (force, torque about A's COM)
  Vec6 on_b = Vec6::Zero();
};

// Spring-damper normal force with regularized Coulomb friction for a
// penetrating pair. Forces are applied at the witness midpoint. dt sets
// the per-step clamp on damping and friction impulses.
ContactWrench contact_force(const ContactPair& pair, const std::vector<BodySpec>& specs,
                            const std::vector<RigidBodyState>& states,
                            const ContactParams& params, double dt = 1.0 / 60.0);

// Threshold used for contact detection inside the teacher.
double default_contact_threshold(const SceneState& scene);

// One semi-implicit Euler step: gravity + contact wrenches update
// velocities, new velocities update poses, quaternions renormalized.
// Optionally reports the net contact impulse (linear, angular about the
// COM) applied to each body during the step.
SceneState step(const SceneState& scene, const ContactParams& params,
                std::vector<Vec6>* impulses = nullptr);

// T steps; the returned trajectory has T+1 frames including the initial.
Trajectory rollout(const SceneState& init, const ContactParams& params, int T);

// Total kinetic energy of the scene's dynamic bodies.
double kinetic_energy(const SceneState& scene);

}  // namespace rigidgraph
