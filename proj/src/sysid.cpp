#include "rigidgraph/sysid.hpp"

#include <cmath>

namespace rigidgraph {

ParamBounds ParamBounds::defaults() {
  ParamBounds b;
  b.lower.d0 = 0.9;
  b.upper.d0 = 0.95;
  b.lower.d_width = 0.95;
  b.upper.d_width = 0.99;
  b.lower.width = 0.0001;
  b.upper.width = 0.01;
  b.lower.midpoint = 0.001;
  b.upper.midpoint = 0.1;
  b.lower.power = 1.0;
  b.upper.power = 5.0;
  b.lower.time_constant = 0.001;
  b.upper.time_constant = 0.1;
  b.lower.damping_ratio = 0.1;
  b.upper.damping_ratio = 10.0;
  b.lower.mu = 0.0;
  b.upper.mu = 1.0;
  return b;
}

std::vector<std::vector<VelocitySample>> finite_diff_velocities(const Trajectory& traj) {
  const int T = traj.num_steps();
  const int nb = traj.num_bodies();
  if (T < 2) throw InvalidInput("finite_diff_velocities: need at least 2 steps");
  if (traj.dt <= 0) throw InvalidInput("finite_diff_velocities: invalid dt");
  std::vector<std::vector<VelocitySample>> out(T, std::vector<VelocitySample>(nb));
  for (int t = 1; t < T; ++t) {
    for (int i = 0; i < nb; ++i) {
      const Pose& prev = traj.frames[t - 1][i];
      const Pose& cur = traj.frames[t][i];
      VelocitySample s;
      s.v = (cur.x - prev.x) / traj.dt;
      // World-frame relative rotation over the step, as axis-angle.
      Quat rel = quat_mul(cur.q, quat_conjugate(prev.q));
      if (rel[0] < 0) rel = -rel;
      const Vec3 vec = rel.tail<3>();
      const double angle = 2.0 * std::atan2(vec.norm(), rel[0]);
      s.w = vec.norm() > 1e-15 ? Vec3(angle / traj.dt * vec.normalized()) : Vec3::Zero();
      out[t][i] = s;
    }
  }
  out[0] = out[1];
  return out;
}

double trajectory_loss(const Trajectory& real, const Trajectory& sim, const VecX& weights) {
  if (real.num_bodies() != sim.num_bodies() || real.num_steps() != sim.num_steps()) {
    throw InvalidInput("trajectory_loss: shape mismatch");
  }
  if (weights.size() != real.num_bodies() || (weights.array() <= 0).any()) {
    throw InvalidInput("trajectory_loss: invalid weights");
  }
  double loss = 0.0;
  for (int t = 1; t < real.num_steps(); ++t) {
    for (int i = 0; i < real.num_bodies(); ++i) {
      const Pose& a = real.frames[t][i];
      const Pose& b = sim.frames[t][i];
      loss += (a.x - b.x).norm() / weights[i];
      loss += std::abs(geodesic_angle(quat_to_rotmat(a.q), quat_to_rotmat(b.q)));
    }
  }
  return loss;
}

namespace {

SceneState scene_from_frame(const Trajectory& traj, const std::vector<std::vector<VelocitySample>>& vels,
                            int t) {
  SceneState scene;
  scene.specs = traj.specs;
  scene.dt = traj.dt;
  scene.states.resize(traj.num_bodies());
  for (int i = 0; i < traj.num_bodies(); ++i) {
    scene.states[i].x = traj.frames[t][i].x;
    scene.states[i].q = traj.frames[t][i].q;
    scene.states[i].v = vels[t][i].v;
    scene.states[i].w = vels[t][i].w;
  }
  return scene;
}

}  // namespace

IdentResult identify(const IdentDataset& dataset, const ParamBounds& bounds, int budget,
                     unsigned long seed) {
  if (dataset.demos.empty()) throw InvalidInput("identify: empty dataset");
  std::vector<std::vector<std::vector<VelocitySample>>> vels;
  for (const Trajectory& demo : dataset.demos) vels.push_back(finite_diff_velocities(demo));

  const auto lower_arr = bounds.lower.as_array();
  const auto upper_arr = bounds.upper.as_array();
  VecX lower(ContactParams::kDim), upper(ContactParams::kDim);
  for (int i = 0; i < ContactParams::kDim; ++i) {
    lower[i] = lower_arr[i];
    upper[i] = upper_arr[i];
  }

  const auto objective = [&](const VecX& x) {
    std::array<double, ContactParams::kDim> arr;
    for (int i = 0; i < ContactParams::kDim; ++i) arr[i] = x[i];
    const ContactParams theta = ContactParams::from_array(arr);
    double loss = 0.0;
    for (size_t k = 0; k < dataset.demos.size(); ++k) {
      const Trajectory& demo = dataset.demos[k];
      const SceneState init = scene_from_frame(demo, vels[k], 0);
      const Trajectory sim = rollout(init, theta, demo.num_steps() - 1);
      loss += trajectory_loss(demo, sim, dataset.weights);
    }
    return loss;
  };

  const CmaesResult res = cmaes_minimize(objective, lower, upper, budget, seed);
  IdentResult out;
  std::array<double, ContactParams::kDim> arr;
  for (int i = 0; i < ContactParams::kDim; ++i) arr[i] = res.x[i];
  out.theta = ContactParams::from_array(arr);
  out.loss = res.loss;
  out.history = res.history;
  return out;
}

}  // namespace rigidgraph
