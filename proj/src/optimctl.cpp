#include "rigidgraph/optimctl.hpp"

#include "rigidgraph/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rigidgraph {

void PushTask::validate() const {
  if (target_radius <= 0.0) throw InvalidInput("push task: target_radius must be positive");
  if (horizon < 2) throw InvalidInput("push task: horizon must be at least 2");
  if (v_max <= 0.0) throw InvalidInput("push task: v_max must be positive");
  const int n = static_cast<int>(scene.specs.size());
  if (pusher_body < 0 || pusher_body >= n) throw InvalidInput("push task: pusher_body out of range");
  if (struck_body < 0 || struck_body >= n) throw InvalidInput("push task: struck_body out of range");
  if (scene.specs[struck_body].is_static) throw InvalidInput("push task: struck body is static");
  if (!decision.allFinite()) throw InvalidInput("push task: decision must be finite");
}

double task_loss(const Trajectory& traj, const PushTask& task) {
  task.validate();
  if (traj.num_steps() < 2) throw InvalidInput("task loss: trajectory needs at least two frames");
  if (task.struck_body >= traj.num_bodies()) {
    throw InvalidInput("task loss: struck body missing from trajectory");
  }
  const Pose& last = traj.frames.back()[task.struck_body];
  const Pose& prev = traj.frames[traj.frames.size() - 2][task.struck_body];
  const Vec2 pos(last.x.x(), last.x.y());
  const Vec2 vel = (Vec2(last.x.x(), last.x.y()) - Vec2(prev.x.x(), prev.x.y())) / traj.dt;
  return (pos - task.target).squaredNorm() + 0.1 * vel.squaredNorm();
}

namespace {

Vec2 clamp_decision(const Vec2& d, double v_max) {
  return Vec2(std::clamp(d.x(), 0.0, v_max), std::clamp(d.y(), 0.0, v_max));
}

}  // namespace

OptimRun optimize_push(const GnnModel& model, const PushTask& task, int iters, double step_size,
                       unsigned long long /*seed*/) {
  task.validate();
  if (iters < 1) throw InvalidInput("optimize push: iters must be at least 1");
  if (step_size <= 0.0) throw InvalidInput("optimize push: step_size must be positive");

  RolloutLossSpec spec;
  spec.body = task.struck_body;
  spec.target = task.target;
  spec.distance_weight = 1.0;
  spec.speed_weight = 0.1;

  SceneState scene = task.scene;
  const double pusher_vz = scene.states[task.pusher_body].v.z();
  auto evaluate = [&](const Vec2& d) -> RolloutGradientResult {
    scene.states[task.pusher_body].v = Vec3(d.x(), d.y(), pusher_vz);
    return rollout_gradient(model, scene, task.horizon, spec, task.pusher_body);
  };

  const double threshold = task.target_radius * task.target_radius;

  OptimRun run;
  Vec2 decision = clamp_decision(task.decision, task.v_max);
  RolloutGradientResult cur = evaluate(decision);
  double step = step_size;

  for (int it = 0; it < iters; ++it) {
    run.loss_history.push_back(cur.loss);
    run.velocity_history.push_back(decision);
    if (cur.loss <= threshold) {
      run.converged = true;
      return run;
    }
    if (!std::isfinite(cur.grad.x()) || !std::isfinite(cur.grad.y())) {
      int halvings = 0;
      for (; halvings < 5; ++halvings) step *= 0.5;
      throw NumericalFailure("optimize push: non-finite gradient at iteration " + std::to_string(it) +
                             " after " + std::to_string(halvings) + " step halvings (decision " +
                             std::to_string(decision.x()) + ", " + std::to_string(decision.y()) + ")");
    }

    // Backtracking line search: halve the step until the candidate does not
    // increase the loss (and its rollout stays finite).
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec2 candidate = clamp_decision(decision - step * cur.grad, task.v_max);
      if ((candidate - decision).norm() < 1e-14) break;  // pinned by the box or step vanished
      RolloutGradientResult next;
      bool finite = true;
      try {
        next = evaluate(candidate);
      } catch (const NumericalFailure&) {
        finite = false;
      }
      if (finite && std::isfinite(next.loss) && next.loss <= cur.loss) {
        decision = candidate;
        cur = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return run;  // stalled: no descent step available
  }
  return run;
}

}  // namespace rigidgraph
