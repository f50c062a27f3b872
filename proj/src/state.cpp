#include "rigidgraph/state.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rigidgraph {

BodySpec BodySpec::dynamic(TriMesh mesh, double mass) {
  BodySpec spec;
  spec.mesh = std::move(mesh);
  spec.mass = mass;
  spec.inertia = mesh_inertia(spec.mesh, mass);
  spec.is_static = false;
  return spec;
}

BodySpec BodySpec::fixed(TriMesh mesh) {
  BodySpec spec;
  spec.mesh = std::move(mesh);
  spec.mass = 0.0;
  spec.inertia = Mat3::Zero();
  spec.is_static = true;
  return spec;
}

std::vector<Vec3> world_vertices(const TriMesh& mesh, const RigidBodyState& state) {
  const Mat3 R = state.rotation();
  std::vector<Vec3> out;
  out.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.push_back(state.x + R * v);
  return out;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  namespace fs = std::filesystem;
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_trajectory: cannot open " + path);
  char buf[256];
  const fs::path dir = fs::path(path).parent_path();
  for (int i = 0; i < traj.num_bodies(); ++i) {
    const BodySpec& spec = traj.specs[i];
    std::string mesh_path = spec.mesh_path;
    if (mesh_path.empty()) {
      mesh_path = (dir / (fs::path(path).stem().string() + "_body" + std::to_string(i) + ".mesh")).string();
      save_mesh(spec.mesh, mesh_path);
    }
    std::snprintf(buf, sizeof(buf), "body %d mesh=%s mass=%.17g static=%d\n", i,
                  mesh_path.c_str(), spec.mass, spec.is_static ? 1 : 0);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "dt=%.17g\n", traj.dt);
  out << buf;
  for (int t = 0; t < traj.num_steps(); ++t) {
    for (int i = 0; i < traj.num_bodies(); ++i) {
      const Pose& p = traj.frames[t][i];
      std::snprintf(buf, sizeof(buf), "t %d %d %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                    t, i, p.x.x(), p.x.y(), p.x.z(), p.q[0], p.q[1], p.q[2], p.q[3]);
      out << buf;
    }
  }
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_trajectory: cannot open " + path);
  Trajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "body") {
      int id = 0;
      std::string mesh_kv, mass_kv, static_kv;
      ss >> id >> mesh_kv >> mass_kv >> static_kv;
      if (!ss || mesh_kv.rfind("mesh=", 0) != 0 || mass_kv.rfind("mass=", 0) != 0 ||
          static_kv.rfind("static=", 0) != 0) {
        throw InvalidInput("load_trajectory: bad body line in " + path);
      }
      if (id != static_cast<int>(traj.specs.size())) {
        throw InvalidInput("load_trajectory: body ids must be consecutive in " + path);
      }
      BodySpec spec;
      spec.mesh_path = mesh_kv.substr(5);
      spec.mesh = load_mesh(spec.mesh_path);
      spec.mass = std::stod(mass_kv.substr(5));
      spec.is_static = static_kv.substr(7) == "1";
      spec.inertia = spec.is_static ? Mat3::Zero() : mesh_inertia(spec.mesh, spec.mass);
      traj.specs.push_back(std::move(spec));
    } else if (tag == "dt") {
      throw InvalidInput("load_trajectory: malformed dt line in " + path);
    } else if (tag.rfind("dt=", 0) == 0) {
      traj.dt = std::stod(tag.substr(3));
    } else if (tag == "t") {
      int step = 0, id = 0;
      Pose p;
      ss >> step >> id >> p.x.x() >> p.x.y() >> p.x.z() >> p.q[0] >> p.q[1] >> p.q[2] >> p.q[3];
      if (!ss) throw InvalidInput("load_trajectory: bad pose line in " + path);
      if (step == static_cast<int>(traj.frames.size())) {
        traj.frames.emplace_back(traj.num_bodies());
      }
      if (step != static_cast<int>(traj.frames.size()) - 1 || id < 0 || id >= traj.num_bodies()) {
        throw InvalidInput("load_trajectory: out-of-order pose line in " + path);
      }
      traj.frames[step][id] = p;
    } else {
      throw InvalidInput("load_trajectory: unknown line tag '" + tag + "' in " + path);
    }
  }
  if (traj.specs.empty() || traj.frames.empty()) {
    throw InvalidInput("load_trajectory: empty trajectory in " + path);
  }
  return traj;
}

}  // namespace rigidgraph
