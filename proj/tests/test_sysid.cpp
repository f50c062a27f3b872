#include "rigidgraph/sysid.hpp"

#include "doctest.h"

#include <cmath>

using namespace rigidgraph;

namespace {

Trajectory constant_pose_traj(int steps) {
  Trajectory traj;
  traj.specs.push_back(BodySpec::dynamic(make_cube(0.05), 0.1));
  traj.frames.assign(steps, {Pose{}});
  return traj;
}

}  // namespace

TEST_CASE("finite differences of a constant pose are zero") {
  const auto vels = finite_diff_velocities(constant_pose_traj(10));
  for (const auto& frame : vels) {
    CHECK(frame[0].v.norm() == 0.0);
    CHECK(frame[0].w.norm() == 0.0);
  }
}

TEST_CASE("finite differences recover linear motion exactly") {
  Trajectory traj = constant_pose_traj(10);
  traj.dt = 0.1;
  for (int t = 0; t < 10; ++t) traj.frames[t][0].x = Vec3(0.1 * t, 0, 0);
  const auto vels = finite_diff_velocities(traj);
  for (int t = 0; t < 10; ++t) CHECK((vels[t][0].v - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("finite differences recover a constant spin from an integrated rollout") {
  SceneState scene;
  scene.gravity = Vec3::Zero();
  scene.dt = 1e-3;
  scene.specs.push_back(BodySpec::dynamic(make_cube(0.05), 0.1));
  scene.states.resize(1);
  scene.states[0].w = Vec3(0, 0, 1);
  const Trajectory traj = rollout(scene, ContactParams{}, 50);
  const auto vels = finite_diff_velocities(traj);
  for (int t = 1; t <= 50; ++t) CHECK((vels[t][0].w - Vec3(0, 0, 1)).norm() < 1e-6);
}

TEST_CASE("finite differences reject single-frame trajectories") {
  CHECK_THROWS_AS(finite_diff_velocities(constant_pose_traj(1)), InvalidInput);
}

TEST_CASE("trajectory loss is zero on identical inputs") {
  const Trajectory traj = constant_pose_traj(8);
  const VecX w = VecX::Constant(1, 0.05);
  CHECK(trajectory_loss(traj, traj, w) == 0.0);
}

TEST_CASE("trajectory loss of a single positional offset") {
  const Trajectory real = constant_pose_traj(5);
  Trajectory sim = real;
  sim.frames[3][0].x = Vec3(0.05, 0, 0);
  const VecX w = VecX::Constant(1, 0.1);
  CHECK(trajectory_loss(real, sim, w) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("trajectory loss of a single rotation offset") {
  const Trajectory real = constant_pose_traj(5);
  Trajectory sim = real;
  sim.frames[2][0].q = quat_from_axis_angle(Vec3(0, 0, 1), M_PI / 2);
  const VecX w = VecX::Constant(1, 0.1);
  CHECK(trajectory_loss(real, sim, w) == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("trajectory loss is additive over steps and bodies") {
  const VecX w1 = VecX::Constant(1, 0.05);
  Trajectory real = constant_pose_traj(6);
  Trajectory sim_a = real, sim_b = real, sim_both = real;
  for (int t = 1; t < 6; ++t) sim_a.frames[t][0].x = Vec3(0.01 * t, 0, 0);
  sim_b.frames[4][0].q = quat_from_axis_angle(Vec3(1, 0, 0), 0.2);
  sim_both.frames[4][0].q = sim_b.frames[4][0].q;
  for (int t = 1; t < 6; ++t) sim_both.frames[t][0].x = sim_a.frames[t][0].x;
  CHECK(trajectory_loss(real, sim_both, w1) ==
        doctest::Approx(trajectory_loss(real, sim_a, w1) + trajectory_loss(real, sim_b, w1)));
}

TEST_CASE("trajectory loss rejects shape mismatches") {
  const VecX w = VecX::Constant(1, 0.05);
  CHECK_THROWS_AS(trajectory_loss(constant_pose_traj(5), constant_pose_traj(6), w), InvalidInput);
  CHECK_THROWS_AS(trajectory_loss(constant_pose_traj(5), constant_pose_traj(5), VecX::Constant(1, -1.0)),
                  InvalidInput);
}

TEST_CASE("minimizer finds the optimum of a shifted sphere on the box") {
  const VecX lower = VecX::Zero(8);
  const VecX upper = VecX::Ones(8);
  VecX center(8);
  center << 0.3, 0.7, 0.5, 0.2, 0.8, 0.4, 0.6, 0.35;
  const auto sphere = [&](const VecX& x) { return (x - center).squaredNorm(); };
  const CmaesResult res = cmaes_minimize(sphere, lower, upper, 2000, 7);
  CHECK((res.x - center).norm() < 1e-3);
}

TEST_CASE("minimizer rejects budgets below the population size") {
  const VecX lower = VecX::Zero(8), upper = VecX::Ones(8);
  const auto f = [](const VecX& x) { return x.squaredNorm(); };
  CHECK_THROWS_AS(cmaes_minimize(f, lower, upper, cmaes_default_lambda(8) - 1, 1), InvalidInput);
}

TEST_CASE("minimizer is deterministic under a fixed seed") {
  const VecX lower = VecX::Zero(4), upper = VecX::Ones(4);
  const auto f = [](const VecX& x) { return (x.array() - 0.25).matrix().squaredNorm(); };
  const CmaesResult a = cmaes_minimize(f, lower, upper, 500, 42);
  const CmaesResult b = cmaes_minimize(f, lower, upper, 500, 42);
  CHECK(a.x == b.x);
  CHECK(a.history == b.history);
}

TEST_CASE("minimizer best-so-far history is non-increasing") {
  const VecX lower = VecX::Zero(5), upper = VecX::Ones(5);
  const auto f = [](const VecX& x) { return (x.array() - 0.6).matrix().squaredNorm(); };
  const CmaesResult res = cmaes_minimize(f, lower, upper, 800, 3);
  for (size_t g = 1; g < res.history.size(); ++g) CHECK(res.history[g] <= res.history[g - 1]);
}

TEST_CASE("minimizer survives non-finite objective regions") {
  const VecX lower = VecX::Zero(2), upper = VecX::Ones(2);
  const auto f = [](const VecX& x) {
    if (x[0] > 0.8) return std::numeric_limits<double>::quiet_NaN();
    return (x - VecX::Constant(2, 0.4)).squaredNorm();
  };
  const CmaesResult res = cmaes_minimize(f, lower, upper, 600, 11);
  CHECK(res.loss < 1e-4);
}

namespace {

// Sliding-cube demonstrations whose stopping distance pins down friction.
IdentDataset sliding_dataset(const ContactParams& theta) {
  SceneState scene;
  scene.specs.push_back(BodySpec::fixed(make_cuboid(2, 2, 0.1)));
  scene.specs.push_back(BodySpec::dynamic(make_cube(0.05), 0.1));
  scene.states.resize(2);
  scene.states[0].x = Vec3(0, 0, -0.05);
  IdentDataset dataset;
  dataset.weights = VecX::Constant(2, 0.05);
  for (double speed : {0.5, 1.0}) {
    scene.states[1].x = Vec3(-0.5, 0, 0.0209);
    scene.states[1].q = quat_identity();
    scene.states[1].v = Vec3(speed, 0, 0);
    scene.states[1].w = Vec3::Zero();
    dataset.demos.push_back(rollout(scene, theta, 60));
  }
  return dataset;
}

double dataset_loss(const IdentDataset& dataset, const ContactParams& theta) {
  double loss = 0.0;
  for (const Trajectory& demo : dataset.demos) {
    const auto vels = finite_diff_velocities(demo);
    SceneState init;
    init.specs = demo.specs;
    init.dt = demo.dt;
    init.states.resize(demo.num_bodies());
    for (int i = 0; i < demo.num_bodies(); ++i) {
      init.states[i].x = demo.frames[0][i].x;
      init.states[i].q = demo.frames[0][i].q;
      init.states[i].v = vels[0][i].v;
      init.states[i].w = vels[0][i].w;
    }
    loss += trajectory_loss(demo, rollout(init, theta, demo.num_steps() - 1), dataset.weights);
  }
  return loss;
}

}  // namespace

TEST_CASE("identification recovers friction from sliding demonstrations") {
  ContactParams theta_gt;
  theta_gt.mu = 0.3;
  const IdentDataset dataset = sliding_dataset(theta_gt);
  const ParamBounds bounds = ParamBounds::defaults();

  ContactParams center;
  const auto lo = bounds.lower.as_array(), hi = bounds.upper.as_array();
  std::array<double, ContactParams::kDim> mid;
  for (int i = 0; i < ContactParams::kDim; ++i) mid[i] = 0.5 * (lo[i] + hi[i]);
  center = ContactParams::from_array(mid);
  const double center_loss = dataset_loss(dataset, center);
  const double gt_loss = dataset_loss(dataset, theta_gt);

  const IdentResult res = identify(dataset, bounds, 300, 5);
  CHECK(std::abs(res.theta.mu - theta_gt.mu) < 0.05);
  CHECK(res.loss <= 0.1 * center_loss);
  CHECK(res.loss <= 1.05 * std::max(gt_loss, 1e-12));
  for (size_t g = 1; g < res.history.size(); ++g) CHECK(res.history[g] <= res.history[g - 1]);
}

TEST_CASE("identification of all-static demonstrations returns the box center") {
  Trajectory traj;
  traj.specs.push_back(BodySpec::fixed(make_cube(0.05)));
  traj.frames.assign(20, {Pose{}});
  IdentDataset dataset;
  dataset.demos = {traj};
  dataset.weights = VecX::Constant(1, 0.05);
  const ParamBounds bounds = ParamBounds::defaults();
  const IdentResult res = identify(dataset, bounds, 100, 9);
  CHECK(res.loss == 0.0);
  const auto lo = bounds.lower.as_array(), hi = bounds.upper.as_array();
  const auto got = res.theta.as_array();
  for (int i = 0; i < ContactParams::kDim; ++i) {
    CHECK(got[i] == doctest::Approx(0.5 * (lo[i] + hi[i])).epsilon(1e-9));
  }
}
