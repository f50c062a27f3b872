#pragma once

#include "rigidgraph/gnn.hpp"
#include "rigidgraph/state.hpp"
#include "rigidgraph/types.hpp"

#include <vector>

namespace rigidgraph {

// Push-to-target task: drive the struck body's final planar position into
// a target disc by choosing the pusher's initial planar velocity.
struct PushTask {
  SceneState scene;
  int pusher_body = 0;
  int struck_body = 1;
  Vec2 target = Vec2::Zero();
  double target_radius = 0.05;
  Vec2 decision = Vec2::Zero();  // initial planar pusher velocity, m/s
  double v_max = 1.0;            // componentwise decision box [0, v_max]
  int horizon = 30;

  void validate() const;
};

struct OptimRun {
  std::vector<double> loss_history;      // one entry per accepted iterate
  std::vector<Vec2> velocity_history;    // matching decisions
  bool converged = false;
};

// Squared planar distance of the struck body's final position to the
// target, plus 0.1 x its squared final planar speed.
double task_loss(const Trajectory& traj, const PushTask& task);

// Plain gradient descent through the differentiable rollout, with the
// step size halved whenever a candidate fails to decrease the loss (so
// the recorded history is non-increasing) and the decision clamped to
// the [0, v_max] box. Converged when loss <= target_radius^2. A
// non-finite gradient at the start aborts after 5 step halvings. The
// seed is recorded for interface stability; descent is deterministic.
OptimRun optimize_push(const GnnModel& model, const PushTask& task, int iters, double step_size,
                       unsigned long long seed);

}  // namespace rigidgraph
