#include "rigidgraph/datagen.hpp"

#include "rigidgraph/collide.hpp"
#include "rigidgraph/rotation.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace rigidgraph {

void ScalingSpec::validate() const {
  const bool ok = n_trajectories >= 1 && n_objects_min >= 1 && n_objects_max >= n_objects_min &&
                  edge_length_min > 0 && edge_length_max >= edge_length_min && mass_min > 0 &&
                  mass_max >= mass_min && initial_speed_min >= 0 &&
                  initial_speed_max >= initial_speed_min && steps_per_trajectory >= 1 &&
                  (region_max - region_min).minCoeff() > 0;
  if (!ok) throw InvalidInput("ScalingSpec: invalid ranges");
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::scaled: return "scaled";
    case Provenance::augmented: return "augmented";
    case Provenance::real_substitute: return "real-substitute";
  }
  throw InvalidInput("provenance_name: unknown value");
}

namespace {

Provenance provenance_from_name(const std::string& name) {
  for (Provenance p : {Provenance::scaled, Provenance::augmented, Provenance::real_substitute}) {
    if (name == provenance_name(p)) return p;
  }
  throw InvalidInput("unknown provenance: " + name);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace

SceneState sample_scene(const ScalingSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const Vec2 extent = spec.region_max - spec.region_min;
  const double plane_margin = 2.0 * std::max(extent.x(), extent.y()) + 4.0 * spec.edge_length_max;

  SceneState scene;
  scene.specs.push_back(BodySpec::fixed(make_cuboid(plane_margin, plane_margin, 0.1)));
  scene.states.resize(1);
  scene.states[0].x = Vec3(0.5 * (spec.region_min.x() + spec.region_max.x()),
                           0.5 * (spec.region_min.y() + spec.region_max.y()), -0.05);

  const int n_objects = spec.n_objects_min +
                        static_cast<int>(std::uniform_int_distribution<int>(
                            0, spec.n_objects_max - spec.n_objects_min)(rng));
  const double speed = uniform(rng, spec.initial_speed_min, spec.initial_speed_max);
  double pusher_edge = 0.0;
  for (int i = 0; i < n_objects; ++i) {
    const double edge = uniform(rng, spec.edge_length_min, spec.edge_length_max);
    const double mass = uniform(rng, spec.mass_min, spec.mass_max);
    const BodySpec body = BodySpec::dynamic(make_cube(edge), mass);
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      RigidBodyState state;
      if (i == 0) {
        state.x = Vec3(uniform(rng, spec.region_min.x(), spec.region_max.x()),
                       uniform(rng, spec.region_min.y(), spec.region_max.y()), edge / 2.0);
      } else {
        // Friction stops the pusher after roughly v^2/(2*mu*g) meters, so
        // other cubes are placed within that sliding reach of the pusher;
        // a cube it cannot reach never produces object-object contact.
        const double g = std::abs(spec.gravity_z);
        const double cap = 0.5 * std::max(extent.x(), extent.y());
        const double reach = g > 0.0 ? std::min(0.8 * speed * speed / g, cap) : cap;
        const double lo = 0.75 * (pusher_edge + edge);
        const double dist = lo + uniform(rng, 0.0, std::max(reach, 0.01));
        const double angle = uniform(rng, 0.0, 2.0 * M_PI);
        state.x = scene.states[1].x +
                  Vec3(dist * std::cos(angle), dist * std::sin(angle), 0.0);
        state.x.z() = edge / 2.0;
        if (state.x.x() < spec.region_min.x() || state.x.x() > spec.region_max.x() ||
            state.x.y() < spec.region_min.y() || state.x.y() > spec.region_max.y()) {
          continue;
        }
      }
      state.q = quat_from_axis_angle(Vec3(0, 0, 1), uniform(rng, 0.0, 2.0 * M_PI));
      bool overlap = false;
      for (size_t j = 1; j < scene.specs.size() && !overlap; ++j) {
        const NearestResult near =
            nearest_points(body.mesh, state, scene.specs[j].mesh, scene.states[j]);
        overlap = near.dist <= 0;
      }
      if (overlap) continue;
      scene.specs.push_back(body);
      scene.states.push_back(state);
      if (i == 0) pusher_edge = edge;
      placed = true;
    }
    if (!placed) throw InvalidInput("sample_scene: placement failed, region too small");
  }

  // The first cube pushes with a sampled planar velocity, aimed (with
  // angular jitter) at another cube when there is one, so trajectories
  // exercise object-object contact rather than lone slides.
  double heading;
  if (scene.specs.size() > 2) {
    const size_t target =
        std::uniform_int_distribution<size_t>(2, scene.specs.size() - 1)(rng);
    const Vec3 d = scene.states[target].x - scene.states[1].x;
    heading = std::atan2(d.y(), d.x()) + uniform(rng, -0.2, 0.2);
  } else {
    heading = uniform(rng, 0.0, 2.0 * M_PI);
  }
  scene.states[1].v = Vec3(speed * std::cos(heading), speed * std::sin(heading), 0.0);
  scene.gravity = Vec3(0, 0, spec.gravity_z);
  return scene;
}

Dataset scale_dataset(const ScalingSpec& spec, const ContactParams& params) {
  spec.validate();
  Dataset dataset;
  dataset.provenance = Provenance::scaled;
  dataset.params_used = params;
  for (int index = 0; index < spec.n_trajectories; ++index) {
    std::mt19937_64 rng(spec.seed + 0x9e3779b97f4a7c15ull * (index + 1));
    bool rich = false;
    for (int retry = 0; retry < 20 && !rich; ++retry) {
      SceneState scene = sample_scene(spec, rng);
      Trajectory traj;
      traj.specs = scene.specs;
      traj.dt = scene.dt;
      for (int t = 0; t <= spec.steps_per_trajectory; ++t) {
        std::vector<Pose> frame(scene.specs.size());
        for (size_t i = 0; i < scene.specs.size(); ++i) {
          frame[i] = Pose{scene.states[i].x, scene.states[i].q};
        }
        traj.frames.push_back(frame);
        if (t == spec.steps_per_trajectory) break;
        const ContactSet contacts =
            contact_pairs(scene.specs, scene.states, default_contact_threshold(scene));
        // Multi-cube scenes must show cube-cube contact; resting on the
        // plane alone does not make a trajectory informative.
        const bool want_pair = scene.specs.size() > 2;
        for (const ContactPair& pair : contacts.pairs) {
          rich = rich || (pair.dist < 0 && (!want_pair || (pair.body_a > 0 && pair.body_b > 0)));
        }
        scene = step(scene, params);
      }
      if (rich) dataset.trajectories.push_back(std::move(traj));
    }
    if (!rich) throw InvalidInput("scale_dataset: no contact-rich rollout after 20 retries");
  }
  return dataset;
}

Dataset augment_rotate_z(const Dataset& base, int n_copies) {
  if (base.trajectories.empty()) throw InvalidInput("augment_rotate_z: empty base");
  if (n_copies < 1) throw InvalidInput("augment_rotate_z: n_copies must be >= 1");
  Dataset out;
  out.provenance = Provenance::augmented;
  out.params_used = base.params_used;
  for (const Trajectory& traj : base.trajectories) {
    Vec3 centroid = Vec3::Zero();
    for (const Pose& pose : traj.frames.at(0)) centroid += pose.x;
    centroid /= static_cast<double>(traj.num_bodies());
    for (int copy = 0; copy < n_copies; ++copy) {
      const double angle = 2.0 * M_PI * copy / n_copies;
      const Quat qz = quat_from_axis_angle(Vec3(0, 0, 1), angle);
      const Mat3 Rz = quat_to_rotmat(qz);
      Trajectory rotated = traj;
      for (auto& frame : rotated.frames) {
        for (Pose& pose : frame) {
          pose.x = centroid + Rz * (pose.x - centroid);
          pose.q = quat_mul(qz, pose.q);
        }
      }
      out.trajectories.push_back(std::move(rotated));
    }
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& dir, const ScalingSpec* spec) {
  namespace fs = std::filesystem;
  const fs::path sub = fs::path(dir) / provenance_name(dataset.provenance);
  fs::create_directories(sub);
  for (size_t i = 0; i < dataset.trajectories.size(); ++i) {
    save_trajectory(dataset.trajectories[i], (sub / (std::to_string(i) + ".traj")).string());
  }
  std::ofstream manifest(fs::path(dir) / "manifest");
  if (!manifest) throw InvalidInput("save_dataset: cannot write manifest in " + dir);
  manifest.precision(17);
  manifest << "provenance=" << provenance_name(dataset.provenance) << "\n";
  manifest << "count=" << dataset.trajectories.size() << "\n";
  const auto arr = dataset.params_used.as_array();
  for (int i = 0; i < ContactParams::kDim; ++i) {
    manifest << "theta." << ContactParams::field_name(i) << "=" << arr[i] << "\n";
  }
  if (spec) {
    manifest << "spec.n_trajectories=" << spec->n_trajectories << "\n";
    manifest << "spec.n_objects_min=" << spec->n_objects_min << "\n";
    manifest << "spec.n_objects_max=" << spec->n_objects_max << "\n";
    manifest << "spec.edge_length_min=" << spec->edge_length_min << "\n";
    manifest << "spec.edge_length_max=" << spec->edge_length_max << "\n";
    manifest << "spec.mass_min=" << spec->mass_min << "\n";
    manifest << "spec.mass_max=" << spec->mass_max << "\n";
    manifest << "spec.initial_speed_min=" << spec->initial_speed_min << "\n";
    manifest << "spec.initial_speed_max=" << spec->initial_speed_max << "\n";
    manifest << "spec.steps_per_trajectory=" << spec->steps_per_trajectory << "\n";
    manifest << "spec.seed=" << spec->seed << "\n";
  }
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest");
  if (!manifest) throw InvalidInput("load_dataset: missing manifest in " + dir);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  Dataset dataset;
  dataset.provenance = provenance_from_name(kv.at("provenance"));
  const size_t count = std::stoul(kv.at("count"));
  auto arr = dataset.params_used.as_array();
  for (int i = 0; i < ContactParams::kDim; ++i) {
    arr[i] = std::stod(kv.at(std::string("theta.") + ContactParams::field_name(i)));
  }
  dataset.params_used = ContactParams::from_array(arr);
  const fs::path sub = fs::path(dir) / provenance_name(dataset.provenance);
  for (size_t i = 0; i < count; ++i) {
    dataset.trajectories.push_back(load_trajectory((sub / (std::to_string(i) + ".traj")).string()));
  }
  return dataset;
}

}  // namespace rigidgraph
