#include "rigidgraph/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace rigidgraph {

Vec3 TriMesh::face_normal(int f) const {
  const auto& fc = faces[f];
  const Vec3 n = (vertices[fc[1]] - vertices[fc[0]]).cross(vertices[fc[2]] - vertices[fc[0]]);
  return n.normalized();
}

double TriMesh::shortest_edge_length() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : edges()) {
    best = std::min(best, (vertices[e[0]] - vertices[e[1]]).norm());
  }
  return best;
}

std::vector<std::array<int, 2>> TriMesh::edges() const {
  std::map<std::pair<int, int>, int> seen;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      seen[{a, b}]++;
    }
  }
  std::vector<std::array<int, 2>> out;
  out.reserve(seen.size());
  for (const auto& [key, count] : seen) out.push_back({key.first, key.second});
  return out;
}

void TriMesh::validate() const {
  const int nv = static_cast<int>(vertices.size());
  if (nv < 4 || faces.size() < 4) throw InvalidInput("mesh: too few vertices/faces");
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= nv) throw InvalidInput("mesh: face index out of range");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw InvalidInput("mesh: degenerate face");
    }
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edge_count[{a, b}]++;
    }
  }
  for (const auto& [key, count] : edge_count) {
    if (count != 2) throw InvalidInput("mesh: edge not shared by exactly two faces");
  }
  // Convexity: all vertices on or behind every face plane.
  for (size_t f = 0; f < faces.size(); ++f) {
    const Vec3 n = face_normal(static_cast<int>(f));
    const Vec3 p0 = vertices[faces[f][0]];
    for (const Vec3& v : vertices) {
      if (n.dot(v - p0) > 1e-9) throw InvalidInput("mesh: not convex");
    }
  }
}

TriMesh make_cuboid(double sx, double sy, double sz) {
  const double hx = 0.5 * sx, hy = 0.5 * sy, hz = 0.5 * sz;
  TriMesh m;
  m.vertices = {{-hx, -hy, -hz}, {hx, -hy, -hz}, {hx, hy, -hz}, {-hx, hy, -hz},
                {-hx, -hy, hz},  {hx, -hy, hz},  {hx, hy, hz},  {-hx, hy, hz}};
  m.faces = {{0, 2, 1}, {0, 3, 2},   // -z
             {4, 5, 6}, {4, 6, 7},   // +z
             {0, 1, 5}, {0, 5, 4},   // -y
             {2, 3, 7}, {2, 7, 6},   // +y
             {1, 2, 6}, {1, 6, 5},   // +x
             {3, 0, 4}, {3, 4, 7}};  // -x
  return m;
}

TriMesh make_tetrahedron(double edge) {
  // Regular tetrahedron inscribed in alternating cube corners.
  const double s = edge / (2.0 * std::sqrt(2.0));
  TriMesh m;
  m.vertices = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return m;
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_mesh: cannot open " + path);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] << " " << f[1] << " " << f[2] << "\n";
  }
}

TriMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_mesh: cannot open " + path);
  TriMesh m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      if (!ss) throw InvalidInput("load_mesh: bad vertex line in " + path);
      m.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      ss >> f[0] >> f[1] >> f[2];
      if (!ss) throw InvalidInput("load_mesh: bad face line in " + path);
      m.faces.push_back(f);
    } else {
      throw InvalidInput("load_mesh: unknown line tag '" + tag + "' in " + path);
    }
  }
  m.validate();
  return m;
}

MeshMassProperties mesh_mass_properties(const TriMesh& mesh) {
  // Signed tetrahedra against the origin; exact for watertight meshes.
  double vol = 0.0;
  Vec3 first_moment = Vec3::Zero();
  Mat3 second_moment = Mat3::Zero();  // integral of x x^T
  for (const auto& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]];
    const Vec3 b = mesh.vertices[f[1]];
    const Vec3 c = mesh.vertices[f[2]];
    const double v6 = a.dot(b.cross(c));  // 6 * signed tet volume
    vol += v6 / 6.0;
    first_moment += v6 / 24.0 * (a + b + c);
    Mat3 s = Mat3::Zero();
    const Vec3 pts[3] = {a, b, c};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        s += (i == j ? 2.0 : 1.0) / 120.0 * pts[i] * pts[j].transpose();
      }
    }
    second_moment += v6 * s;
  }
  MeshMassProperties props;
  props.volume = vol;
  props.centroid = first_moment / vol;
  // Shift x x^T integral to the centroid, then to inertia form.
  const Mat3 shifted = second_moment - vol * props.centroid * props.centroid.transpose();
  props.unit_inertia = Mat3::Identity() * shifted.trace() - shifted;
  return props;
}

Mat3 mesh_inertia(const TriMesh& mesh, double mass) {
  const MeshMassProperties props = mesh_mass_properties(mesh);
  return props.unit_inertia * (mass / props.volume);
}

}  // namespace rigidgraph
