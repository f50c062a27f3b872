#pragma once

#include "rigidgraph/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace rigidgraph {

// Watertight convex triangle mesh in body frame.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  // Outward unit normal of face f (faces are CCW seen from outside).
  Vec3 face_normal(int f) const;

  double shortest_edge_length() const;

  // Undirected vertex-index edge list (each edge once, i < j).
  std::vector<std::array<int, 2>> edges() const;

  // Throws InvalidInput if indices are bad, an edge is not shared by
  // exactly two faces, or a vertex lies outside a face plane by > 1e-9.
  void validate() const;
};

// Axis-aligned cuboid centered at the origin, 12 triangles.
TriMesh make_cuboid(double sx, double sy, double sz);
inline TriMesh make_cube(double edge) { return make_cuboid(edge, edge, edge); }

// Regular tetrahedron with the given edge length, centroid at the origin.
TriMesh make_tetrahedron(double edge);

// Structured text interchange: `v x y z` and `f i j k` lines, 0-based
// indices, 17-significant-digit floats.
void save_mesh(const TriMesh& mesh, const std::string& path);
TriMesh load_mesh(const std::string& path);

// Volume, centroid and inertia tensor about the centroid at uniform
// density, by the divergence-theorem polyhedron integrals.
struct MeshMassProperties {
  double volume = 0.0;
  Vec3 centroid = Vec3::Zero();
  Mat3 unit_inertia = Mat3::Zero();  // inertia / density
};
MeshMassProperties mesh_mass_properties(const TriMesh& mesh);

// Inertia tensor about the centroid for a mesh of the given total mass.
Mat3 mesh_inertia(const TriMesh& mesh, double mass);

}  // namespace rigidgraph
