#include "rigidgraph/optimctl.hpp"

#include "rigidgraph/gnn.hpp"
#include "rigidgraph/types.hpp"

#include "doctest.h"

#include <cmath>

using namespace rigidgraph;

namespace {

GnnConfig small_config() {
  GnnConfig c;
  c.latent = 16;
  c.hidden = 16;
  c.layers = 0;  // zero decoder: constant-velocity extrapolation
  c.history = 2;
  c.seed = 7;
  return c;
}

PushTask single_cube_task() {
  PushTask task;
  task.scene.specs.push_back(BodySpec::dynamic(make_cube(0.05), 0.1));
  RigidBodyState s;
  s.x = Vec3(0.0, 0.0, 0.025);
  task.scene.states.push_back(s);
  task.scene.gravity.setZero();
  task.pusher_body = 0;
  task.struck_body = 0;
  task.target = Vec2(0.05, 0.02);
  task.target_radius = 0.02;
  task.horizon = 10;
  return task;
}

// Two-frame trajectory with the struck cube ending at `pos` with planar
// velocity `vel`.
Trajectory two_frame_traj(const PushTask& task, const Vec2& pos, const Vec2& vel) {
  Trajectory traj;
  traj.specs = task.scene.specs;
  traj.dt = task.scene.dt;
  Pose last;
  last.x = Vec3(pos.x(), pos.y(), 0.025);
  Pose prev = last;
  prev.x.head<2>() -= traj.dt * vel;
  traj.frames.push_back({prev});
  traj.frames.push_back({last});
  return traj;
}

}  // namespace

TEST_CASE("task loss on hand-built final frames") {
  const PushTask task = single_cube_task();

  SUBCASE("at rest on the target: zero loss") {
    const Trajectory traj = two_frame_traj(task, task.target, Vec2::Zero());
    CHECK(task_loss(traj, task) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
  SUBCASE("at rest 0.1 m short: squared distance") {
    const Trajectory traj = two_frame_traj(task, task.target - Vec2(0.1, 0.0), Vec2::Zero());
    CHECK(task_loss(traj, task) == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("on the target but moving at 1 m/s: residual speed penalty") {
    const Trajectory traj = two_frame_traj(task, task.target, Vec2(1.0, 0.0));
    CHECK(task_loss(traj, task) == doctest::Approx(0.1).epsilon(1e-9));
  }
}

TEST_CASE("task and loss inputs are validated") {
  PushTask task = single_cube_task();
  const Trajectory traj = two_frame_traj(task, task.target, Vec2::Zero());

  PushTask bad_radius = task;
  bad_radius.target_radius = -0.1;
  CHECK_THROWS_AS(task_loss(traj, bad_radius), InvalidInput);

  PushTask bad_horizon = task;
  bad_horizon.horizon = 1;
  CHECK_THROWS_AS(task_loss(traj, bad_horizon), InvalidInput);

  PushTask bad_body = task;
  bad_body.struck_body = 3;
  CHECK_THROWS_AS(bad_body.validate(), InvalidInput);

  Trajectory short_traj = traj;
  short_traj.frames.resize(1);
  CHECK_THROWS_AS(task_loss(short_traj, task), InvalidInput);

  const GnnModel model = make_model(small_config());
  CHECK_THROWS_AS(optimize_push(model, task, 0, 0.1, 0), InvalidInput);
  CHECK_THROWS_AS(optimize_push(model, task, 10, -0.5, 0), InvalidInput);
}

TEST_CASE("descent on a self-push task converges inside the target disc") {
  const GnnModel model = make_model(small_config());
  PushTask task = single_cube_task();  // optimizing the struck cube's own velocity
  task.decision = Vec2(0.0, 0.0);
  task.target = Vec2(0.008, 0.004);  // reachable within the 0.02 m radius despite speed cost

  const OptimRun run = optimize_push(model, task, 50, 2.0, 0);
  CHECK(run.converged);
  CHECK(run.loss_history.size() == run.velocity_history.size());
  CHECK(run.loss_history.size() <= 50);
  CHECK(run.loss_history.back() <= task.target_radius * task.target_radius);
  for (size_t i = 1; i < run.loss_history.size(); ++i) {
    CHECK(run.loss_history[i] <= run.loss_history[i - 1]);
  }
  for (const Vec2& v : run.velocity_history) {
    CHECK(v.x() >= 0.0);
    CHECK(v.y() >= 0.0);
    CHECK(v.x() <= task.v_max);
    CHECK(v.y() <= task.v_max);
  }
}

TEST_CASE("already-solved task converges at iteration zero") {
  const GnnModel model = make_model(small_config());
  PushTask task = single_cube_task();
  task.target = Vec2(0.0, 0.0);  // cube already sits on the target, at rest
  task.decision = Vec2::Zero();

  const OptimRun run = optimize_push(model, task, 50, 1.0, 3);
  CHECK(run.converged);
  CHECK(run.loss_history.size() == 1);
  CHECK(run.loss_history[0] <= task.target_radius * task.target_radius);
}

TEST_CASE("decisions stay inside the velocity box when the target pulls outward") {
  const GnnModel model = make_model(small_config());
  PushTask task = single_cube_task();
  task.target = Vec2(-0.5, 0.3);  // unreachable with non-negative v_x
  task.target_radius = 0.01;
  task.v_max = 0.2;

  const OptimRun run = optimize_push(model, task, 20, 5.0, 0);
  CHECK(!run.converged);
  for (const Vec2& v : run.velocity_history) {
    CHECK(v.x() >= 0.0);
    CHECK(v.y() >= 0.0);
    CHECK(v.x() <= task.v_max + 1e-12);
    CHECK(v.y() <= task.v_max + 1e-12);
  }
  for (size_t i = 1; i < run.loss_history.size(); ++i) {
    CHECK(run.loss_history[i] <= run.loss_history[i - 1]);
  }
}

TEST_CASE("fixed seed and inputs reproduce the run exactly") {
  const GnnModel model = make_model(small_config());
  PushTask task = single_cube_task();
  task.target = Vec2(0.01, 0.006);

  const OptimRun a = optimize_push(model, task, 15, 1.0, 42);
  const OptimRun b = optimize_push(model, task, 15, 1.0, 42);
  REQUIRE(a.loss_history.size() == b.loss_history.size());
  for (size_t i = 0; i < a.loss_history.size(); ++i) {
    CHECK(a.loss_history[i] == b.loss_history[i]);
    CHECK((a.velocity_history[i] - b.velocity_history[i]).norm() == 0.0);
  }
  CHECK(a.converged == b.converged);
}

TEST_CASE("gradient is nontrivial away from the optimum") {
  const GnnModel model = make_model(small_config());
  PushTask task = single_cube_task();
  task.target = Vec2(0.05, 0.0);
  task.decision = Vec2(0.0, 0.0);

  RolloutLossSpec spec;
  spec.body = task.struck_body;
  spec.target = task.target;
  const RolloutGradientResult res = rollout_gradient(model, task.scene, task.horizon, spec, 0);
  CHECK(res.grad.norm() > 0.0);
}
