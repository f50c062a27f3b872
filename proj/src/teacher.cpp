#include "rigidgraph/teacher.hpp"

#include <cmath>
#include <limits>

namespace rigidgraph {

const char* ContactParams::field_name(int i) {
  static const char* names[kDim] = {"d0",    "d_width",       "width",         "midpoint",
                                    "power", "time_constant", "damping_ratio", "mu"};
  return names[i];
}

double impedance(double violation, const ContactParams& params) {
  if (violation < 0) throw InvalidInput("impedance: negative violation");
  if (violation >= params.width) return params.d_width;
  const double s = violation / params.width;
  const double m = params.midpoint, p = params.power;
  // C1 join at s = m: a = m^(1-p), b = (1-m)^(1-p).
  double y;
  if (s <= m) {
    y = std::pow(m, 1.0 - p) * std::pow(s, p);
  } else {
    y = 1.0 - std::pow(1.0 - m, 1.0 - p) * std::pow(1.0 - s, p);
  }
  return params.d0 + (params.d_width - params.d0) * y;
}

namespace {

// Effective mass of the contact point pair along direction d, including
// the rotational compliance of both bodies.
double directional_effective_mass(const Vec3& d, const Vec3& point, const BodySpec& spec_a,
                                  const RigidBodyState& sa, const BodySpec& spec_b,
                                  const RigidBodyState& sb) {
  double inv = 0.0;
  for (const auto& [spec, state] : {std::pair{&spec_a, &sa}, std::pair{&spec_b, &sb}}) {
    if (spec->is_static) continue;
    const Mat3 R = state->rotation();
    const Mat3 inv_inertia = (R * spec->inertia * R.transpose()).inverse();
    const Vec3 rxd = (point - state->x).cross(d);
    inv += 1.0 / spec->mass + rxd.dot(inv_inertia * rxd);
  }
  return 1.0 / inv;
}

}  // namespace

ContactWrench contact_force(const ContactPair& pair, const std::vector<BodySpec>& specs,
                            const std::vector<RigidBodyState>& states,
                            const ContactParams& params, double dt) {
  ContactWrench wrench;
  if (pair.dist >= 0) return wrench;
  const double r = -pair.dist;
  const RigidBodyState& sa = states[pair.body_a];
  const RigidBodyState& sb = states[pair.body_b];
  const Vec3 n = pair.normal;  // A to B
  const Vec3 point = 0.5 * (pair.p_a + pair.p_b);
  const Vec3 vel_a = sa.v + sa.w.cross(point - sa.x);
  const Vec3 vel_b = sb.v + sb.w.cross(point - sb.x);
  const Vec3 v_rel = vel_b - vel_a;
  const double separation_rate = v_rel.dot(n);

  const double k = 1.0 / (params.time_constant * params.time_constant);
  const double b = 2.0 * params.damping_ratio / params.time_constant;
  // Implicit spring-damper impulse: j = c (k r' - b s') with the force
  // law evaluated at the post-impulse state s' = s + j, r' = r - dt s'.
  // Stable for stiff (small time constant) settings at the fixed step.
  const double c = dt * impedance(r, params);
  const double gain = k * dt + b;
  double j = (c * k * r - c * gain * separation_rate) / (1.0 + c * gain);
  // Restitution cap: the post-impulse separation rate may not exceed a
  // small positional-correction bias, so deep impacts stay inelastic.
  const double bias = 0.3 * std::min(r, params.width) / dt;
  j = std::clamp(j, 0.0, std::max(0.0, -separation_rate + bias));
  const BodySpec& spec_a = specs[pair.body_a];
  const BodySpec& spec_b = specs[pair.body_b];
  const double m_eff_n = directional_effective_mass(n, point, spec_a, sa, spec_b, sb);
  const double f_n = m_eff_n * j / dt;

  Vec3 force_on_b = f_n * n;

  const Vec3 v_t = v_rel - separation_rate * n;
  const double speed_t = v_t.norm();
  if (speed_t > 1e-12 && f_n > 0) {
    constexpr double v_reg = 1e-3;  // m/s
    const Vec3 t_hat = v_t / speed_t;
    double f_t = params.mu * f_n * std::tanh(speed_t / v_reg);
    // Friction may not reverse the tangential point velocity in a step.
    const double m_eff_t = directional_effective_mass(t_hat, point, spec_a, sa, spec_b, sb);
    f_t = std::min(f_t, m_eff_t * speed_t / dt);
    force_on_b -= f_t * t_hat;
  }

  wrench.on_b.head<3>() = force_on_b;
  wrench.on_b.tail<3>() = (point - sb.x).cross(force_on_b);
  wrench.on_a.head<3>() = -force_on_b;
  wrench.on_a.tail<3>() = (point - sa.x).cross(-force_on_b);
  return wrench;
}

double default_contact_threshold(const SceneState& scene) {
  double shortest = std::numeric_limits<double>::infinity();
  for (const BodySpec& spec : scene.specs) {
    shortest = std::min(shortest, spec.mesh.shortest_edge_length());
  }
  return 0.1 * shortest;
}

SceneState step(const SceneState& scene, const ContactParams& params,
                std::vector<Vec6>* impulses) {
  if (scene.dt <= 0 || scene.specs.empty()) throw InvalidInput("step: invalid scene");
  SceneState next = scene;
  const int n = static_cast<int>(scene.specs.size());

  std::vector<Mat3> inv_inertia_world(n, Mat3::Zero());
  for (int i = 0; i < n; ++i) {
    const BodySpec& spec = scene.specs[i];
    RigidBodyState& s = next.states[i];
    if (spec.is_static) continue;
    const Mat3 R = s.rotation();
    const Mat3 inertia_world = R * spec.inertia * R.transpose();
    inv_inertia_world[i] = inertia_world.inverse();
    s.v += scene.dt * scene.gravity;
    s.w += scene.dt * inv_inertia_world[i] * (-s.w.cross(inertia_world * s.w));
  }

  // Projected Gauss-Seidel over the penetrating contacts. Per contact
  // the normal velocity target is the implicit spring-damper response
  // capped by a small positional-correction bias (keeps deep impacts
  // inelastic); friction impulses are limited by the regularized
  // Coulomb cone evaluated at the pre-solve sliding speed.
  const double dt = scene.dt;
  const ContactSet contacts = contact_pairs(scene.specs, scene.states,
                                            default_contact_threshold(scene));
  struct Constraint {
    int a, b;
    Vec3 point, n;
    double m_eff_n;
    double s_target;
    double friction_limit;  // multiplies the normal impulse
    double lambda_n = 0.0;
    Vec3 lambda_t = Vec3::Zero();
  };
  std::vector<Constraint> constraints;
  auto point_velocity = [&](int body, const Vec3& point) -> Vec3 {
    const RigidBodyState& s = next.states[body];
    return s.v + s.w.cross(point - s.x);
  };
  for (const ContactPair& pair : contacts.pairs) {
    if (pair.dist >= 0) continue;
    Constraint con;
    con.a = pair.body_a;
    con.b = pair.body_b;
    con.point = 0.5 * (pair.p_a + pair.p_b);
    con.n = pair.normal;
    const double r = -pair.dist;
    con.m_eff_n = directional_effective_mass(con.n, con.point, scene.specs[con.a],
                                             next.states[con.a], scene.specs[con.b],
                                             next.states[con.b]);
    const Vec3 v_rel = point_velocity(con.b, con.point) - point_velocity(con.a, con.point);
    const double s0 = v_rel.dot(con.n);
    const double k = 1.0 / (params.time_constant * params.time_constant);
    const double gain = k * dt + 2.0 * params.damping_ratio / params.time_constant;
    const double c = dt * impedance(r, params);
    const double bias = 0.3 * std::min(r, params.width) / dt;
    con.s_target = std::min((s0 + c * k * r) / (1.0 + c * gain), bias);
    const Vec3 v_t0 = v_rel - s0 * con.n;
    con.friction_limit = params.mu * std::tanh(v_t0.norm() / 1e-3);
    constraints.push_back(con);
  }
  std::vector<Vec6> contact_impulse(n, Vec6::Zero());
  auto apply_impulse = [&](int body, const Vec3& point, const Vec3& impulse, double sign) {
    contact_impulse[body] += sign * (Vec6() << impulse, (point - next.states[body].x).cross(impulse)).finished();
    if (scene.specs[body].is_static) return;
    next.states[body].v += sign * impulse / scene.specs[body].mass;
    next.states[body].w += sign * inv_inertia_world[body] *
                           (point - next.states[body].x).cross(impulse);
  };
  for (int iter = 0; iter < 10; ++iter) {
    for (Constraint& con : constraints) {
      const Vec3 v_rel = point_velocity(con.b, con.point) - point_velocity(con.a, con.point);
      const double s = v_rel.dot(con.n);
      const double new_lambda = std::max(0.0, con.lambda_n + con.m_eff_n * (con.s_target - s));
      const Vec3 dp = (new_lambda - con.lambda_n) * con.n;
      con.lambda_n = new_lambda;
      apply_impulse(con.b, con.point, dp, 1.0);
      apply_impulse(con.a, con.point, dp, -1.0);

      const Vec3 v_rel2 = point_velocity(con.b, con.point) - point_velocity(con.a, con.point);
      const Vec3 v_t = v_rel2 - v_rel2.dot(con.n) * con.n;
      if (v_t.squaredNorm() > 1e-24 || con.lambda_t.squaredNorm() > 0) {
        const Vec3 dir = v_t.norm() > 1e-12 ? Vec3(v_t.normalized()) : Vec3::UnitX();
        const double m_eff_t = directional_effective_mass(
            dir, con.point, scene.specs[con.a], next.states[con.a], scene.specs[con.b],
            next.states[con.b]);
        Vec3 target = con.lambda_t - m_eff_t * v_t;
        const double limit = con.friction_limit * con.lambda_n;
        if (target.norm() > limit) target *= limit / target.norm();
        const Vec3 dpt = target - con.lambda_t;
        con.lambda_t = target;
        apply_impulse(con.b, con.point, dpt, 1.0);
        apply_impulse(con.a, con.point, dpt, -1.0);
      }
    }
  }
  if (impulses) *impulses = contact_impulse;

  for (int i = 0; i < n; ++i) {
    if (scene.specs[i].is_static) continue;
    RigidBodyState& s = next.states[i];
    s.x += scene.dt * s.v;
    const Quat rate = quat_mul(Quat(0.0, s.w.x(), s.w.y(), s.w.z()), s.q);
    s.q += scene.dt * 0.5 * rate;
    s.q.normalize();
  }
  return next;
}

Trajectory rollout(const SceneState& init, const ContactParams& params, int T) {
  if (T < 1) throw InvalidInput("rollout: T must be >= 1");
  Trajectory traj;
  traj.specs = init.specs;
  traj.dt = init.dt;
  SceneState scene = init;
  auto record = [&](const SceneState& s) {
    std::vector<Pose> frame;
    frame.reserve(s.states.size());
    for (const RigidBodyState& st : s.states) frame.push_back({st.x, st.q});
    traj.frames.push_back(std::move(frame));
  };
  record(scene);
  for (int t = 0; t < T; ++t) {
    scene = step(scene, params);
    record(scene);
  }
  return traj;
}

double kinetic_energy(const SceneState& scene) {
  double e = 0.0;
  for (size_t i = 0; i < scene.specs.size(); ++i) {
    const BodySpec& spec = scene.specs[i];
    if (spec.is_static) continue;
    const RigidBodyState& s = scene.states[i];
    const Mat3 R = s.rotation();
    e += 0.5 * spec.mass * s.v.squaredNorm();
    e += 0.5 * s.w.dot(R * spec.inertia * R.transpose() * s.w);
  }
  return e;
}

}  // namespace rigidgraph
