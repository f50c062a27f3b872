#include "rigidgraph/collide.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace rigidgraph {

void Aabb::grow(const Vec3& p) {
  lo = lo.cwiseMin(p);
  hi = hi.cwiseMax(p);
}

Aabb Aabb::inflated(double margin) const {
  Aabb out;
  out.lo = lo - Vec3::Constant(margin);
  out.hi = hi + Vec3::Constant(margin);
  return out;
}

bool Aabb::overlaps(const Aabb& other) const {
  return (lo.array() <= other.hi.array()).all() && (other.lo.array() <= hi.array()).all();
}

namespace {

Aabb points_aabb(const std::vector<Vec3>& pts) {
  Aabb box;
  for (const Vec3& p : pts) box.grow(p);
  return box;
}

// ---------------------------------------------------------------------------
// Closest-point primitives
// ---------------------------------------------------------------------------

// Closest point on triangle (a,b,c) to p, with barycentric weights.
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                         Vec3* bary = nullptr) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  auto result = [&](double u, double v, double w) {
    if (bary) *bary = Vec3(u, v, w);
    return u * a + v * b + w * c;
  };
  if (d1 <= 0.0 && d2 <= 0.0) return result(1, 0, 0);
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return result(0, 1, 0);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return result(1 - v, v, 0);
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return result(0, 0, 1);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return result(1 - w, 0, w);
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return result(0, 1 - w, w);
  }
  const double denom = va + vb + vc;
  const double v = vb / denom, w = vc / denom;
  return result(1 - v - w, v, w);
}

// Closest points between segments p1+s*d1 and p2+t*d2.
void closest_between_segments(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                              Vec3& c1, Vec3& c2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double kEps = 1e-14;
  if (a <= kEps && e <= kEps) {
    c1 = p1;
    c2 = p2;
    return;
  }
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > kEps) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  c1 = p1 + s * d1;
  c2 = p2 + t * d2;
}

bool segment_triangle_intersect(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b,
                                const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, qp = p - q;
  const Vec3 n = ab.cross(ac);
  const double d = qp.dot(n);
  if (std::abs(d) < 1e-14) return false;  // parallel; grazing handled by distance tests
  const Vec3 ap = p - a;
  const double t = ap.dot(n) / d;
  if (t < 0.0 || t > 1.0) return false;
  const Vec3 e = qp.cross(ap);
  double v = ac.dot(e) / d;
  double w = -ab.dot(e) / d;
  return v >= 0.0 && w >= 0.0 && v + w <= 1.0;
}

bool triangles_intersect(const Vec3 ta[3], const Vec3 tb[3]) {
  for (int k = 0; k < 3; ++k) {
    if (segment_triangle_intersect(ta[k], ta[(k + 1) % 3], tb[0], tb[1], tb[2])) return true;
    if (segment_triangle_intersect(tb[k], tb[(k + 1) % 3], ta[0], ta[1], ta[2])) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// GJK / EPA over convex vertex clouds
// ---------------------------------------------------------------------------

struct SupportVertex {
  Vec3 m;  // a - b, Minkowski difference space
  Vec3 a;
  Vec3 b;
};

struct SupportFn {
  const std::vector<Vec3>* verts_a;
  const std::vector<Vec3>* verts_b;

  SupportVertex operator()(const Vec3& dir) const {
    auto best = [](const std::vector<Vec3>& pts, const Vec3& d) {
      int arg = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < pts.size(); ++i) {
        const double s = pts[i].dot(d);
        if (s > top) {
          top = s;
          arg = static_cast<int>(i);
        }
      }
      return pts[arg];
    };
    SupportVertex sv;
    sv.a = best(*verts_a, dir);
    sv.b = best(*verts_b, -dir);
    sv.m = sv.a - sv.b;
    return sv;
  }
};

// Closest point to the origin on the current simplex; reduces the simplex
// to the supporting feature and leaves barycentric weights aligned with it.
Vec3 simplex_closest(std::vector<SupportVertex>& simplex, std::vector<double>& bary) {
  const size_t n = simplex.size();
  if (n == 1) {
    bary = {1.0};
    return simplex[0].m;
  }
  if (n == 2) {
    const Vec3 a = simplex[0].m, b = simplex[1].m;
    const Vec3 ab = b - a;
    const double denom = ab.squaredNorm();
    double t = denom > 0 ? std::clamp(-a.dot(ab) / denom, 0.0, 1.0) : 0.0;
    if (t <= 0.0) {
      simplex = {simplex[0]};
      bary = {1.0};
      return a;
    }
    if (t >= 1.0) {
      simplex = {simplex[1]};
      bary = {1.0};
      return b;
    }
    bary = {1.0 - t, t};
    return a + t * ab;
  }
  if (n == 3) {
    Vec3 w;
    const Vec3 c = closest_on_triangle(Vec3::Zero(), simplex[0].m, simplex[1].m, simplex[2].m, &w);
    std::vector<SupportVertex> kept;
    std::vector<double> kept_w;
    for (int i = 0; i < 3; ++i) {
      if (w[i] > 1e-12) {
        kept.push_back(simplex[i]);
        kept_w.push_back(w[i]);
      }
    }
    simplex = kept;
    bary = kept_w;
    return c;
  }
  // Tetrahedron: origin inside, or the closest of the four faces.
  const std::array<std::array<int, 3>, 4> tris = {{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
  double best_d = std::numeric_limits<double>::infinity();
  Vec3 best_c = Vec3::Zero();
  std::vector<SupportVertex> best_simplex;
  std::vector<double> best_bary;
  bool inside = true;
  for (const auto& tri : tris) {
    const int other = 6 - tri[0] - tri[1] - tri[2];
    const Vec3 a = simplex[tri[0]].m, b = simplex[tri[1]].m, c = simplex[tri[2]].m;
    Vec3 nrm = (b - a).cross(c - a);
    if (nrm.dot(simplex[other].m - a) > 0) nrm = -nrm;  // outward
    if (nrm.dot(-a) <= 0) continue;  // origin not outside this face
    inside = false;
    Vec3 w;
    const Vec3 cp = closest_on_triangle(Vec3::Zero(), a, b, c, &w);
    if (cp.squaredNorm() < best_d) {
      best_d = cp.squaredNorm();
      best_c = cp;
      best_simplex.clear();
      best_bary.clear();
      for (int i = 0; i < 3; ++i) {
        if (w[i] > 1e-12) {
          best_simplex.push_back(simplex[tri[i]]);
          best_bary.push_back(w[i]);
        }
      }
    }
  }
  if (inside) {
    bary = {0.25, 0.25, 0.25, 0.25};
    return Vec3::Zero();
  }
  simplex = best_simplex;
  bary = best_bary;
  return best_c;
}

struct EpaFace {
  int v[3];
  Vec3 normal;  // outward unit normal
  double dist;  // plane distance from the origin
};

bool make_epa_face(const std::vector<SupportVertex>& verts, int i, int j, int k,
                   const Vec3& interior, EpaFace& face) {
  const Vec3 a = verts[i].m, b = verts[j].m, c = verts[k].m;
  Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len < 1e-14) return false;
  n /= len;
  if (n.dot(a - interior) < 0) {
    n = -n;
    face.v[0] = i;
    face.v[1] = k;
    face.v[2] = j;
  } else {
    face.v[0] = i;
    face.v[1] = j;
    face.v[2] = k;
  }
  face.normal = n;
  face.dist = n.dot(a);
  return true;
}

NearestResult epa_penetration(std::vector<SupportVertex> verts, const SupportFn& support) {
  Vec3 interior = Vec3::Zero();
  for (const auto& v : verts) interior += v.m;
  interior /= static_cast<double>(verts.size());

  std::vector<EpaFace> faces;
  const std::array<std::array<int, 3>, 4> tris = {{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}};
  for (const auto& t : tris) {
    EpaFace f;
    if (!make_epa_face(verts, t[0], t[1], t[2], interior, f)) {
      throw NumericalFailure("EPA: degenerate initial polytope");
    }
    faces.push_back(f);
  }

  for (int iter = 0; iter < 128; ++iter) {
    int best = 0;
    for (size_t i = 1; i < faces.size(); ++i) {
      if (faces[i].dist < faces[best].dist) best = static_cast<int>(i);
    }
    const EpaFace face = faces[best];
    const SupportVertex s = support(face.normal);
    const double growth = face.normal.dot(s.m) - face.dist;
    if (growth < 1e-8) {
      // Project the origin onto the closest face and read off witnesses.
      const Vec3 a = verts[face.v[0]].m, b = verts[face.v[1]].m, c = verts[face.v[2]].m;
      Vec3 w;
      closest_on_triangle(Vec3::Zero(), a, b, c, &w);
      NearestResult res;
      res.p_a = w[0] * verts[face.v[0]].a + w[1] * verts[face.v[1]].a + w[2] * verts[face.v[2]].a;
      res.p_b = w[0] * verts[face.v[0]].b + w[1] * verts[face.v[1]].b + w[2] * verts[face.v[2]].b;
      res.dist = -std::max(face.dist, 0.0);
      res.normal = face.normal;
      return res;
    }
    const int new_index = static_cast<int>(verts.size());
    verts.push_back(s);
    // Remove faces visible from the new point, keep the horizon.
    std::map<std::pair<int, int>, int> edge_use;
    std::vector<EpaFace> kept;
    for (const EpaFace& f : faces) {
      if (f.normal.dot(s.m) - f.dist > 1e-12) {
        for (int k = 0; k < 3; ++k) {
          int u = f.v[k], v = f.v[(k + 1) % 3];
          if (u > v) std::swap(u, v);
          edge_use[{u, v}]++;
        }
      } else {
        kept.push_back(f);
      }
    }
    for (const auto& [edge, count] : edge_use) {
      if (count != 1) continue;  // interior edge of the visible patch
      EpaFace f;
      if (make_epa_face(verts, edge.first, edge.second, new_index, interior, f)) {
        kept.push_back(f);
      }
    }
    if (kept.size() == faces.size()) {
      throw NumericalFailure("EPA: no visible faces, polytope stalled");
    }
    faces = std::move(kept);
    if (faces.empty()) throw NumericalFailure("EPA: polytope collapsed");
  }
  throw NumericalFailure("EPA: no convergence after 128 iterations");
}

// Grow a degenerate terminal simplex into a proper tetrahedron for EPA.
void blow_up_simplex(std::vector<SupportVertex>& simplex, const SupportFn& support) {
  auto contains = [&](const Vec3& m) {
    for (const auto& v : simplex) {
      if ((v.m - m).squaredNorm() < 1e-20) return true;
    }
    return false;
  };
  const Vec3 axes[6] = {Vec3::UnitX(),  Vec3::UnitY(),  Vec3::UnitZ(),
                        -Vec3::UnitX(), -Vec3::UnitY(), -Vec3::UnitZ()};
  if (simplex.size() == 1) {
    for (const Vec3& d : axes) {
      const SupportVertex s = support(d);
      if (!contains(s.m)) {
        simplex.push_back(s);
        break;
      }
    }
  }
  if (simplex.size() == 2) {
    const Vec3 dir = (simplex[1].m - simplex[0].m).normalized();
    Vec3 ortho = dir.cross(Vec3::UnitX());
    if (ortho.squaredNorm() < 1e-6) ortho = dir.cross(Vec3::UnitY());
    ortho.normalize();
    for (int k = 0; k < 6; ++k) {
      const Vec3 d = Eigen::AngleAxisd(k * M_PI / 3.0, dir) * ortho;
      const SupportVertex s = support(d);
      const Vec3 ab = simplex[1].m - simplex[0].m;
      if ((s.m - simplex[0].m).cross(ab).squaredNorm() > 1e-18) {
        simplex.push_back(s);
        break;
      }
    }
  }
  if (simplex.size() == 3) {
    const Vec3 n =
        (simplex[1].m - simplex[0].m).cross(simplex[2].m - simplex[0].m).normalized();
    for (const Vec3 d : {n, Vec3(-n)}) {
      const SupportVertex s = support(d);
      if (std::abs((s.m - simplex[0].m).dot(n)) > 1e-12) {
        simplex.push_back(s);
        break;
      }
    }
  }
  if (simplex.size() != 4) {
    throw NumericalFailure("GJK/EPA: cannot build a non-degenerate tetrahedron");
  }
}

NearestResult gjk_nearest(const std::vector<Vec3>& va, const std::vector<Vec3>& vb) {
  const SupportFn support{&va, &vb};
  std::vector<SupportVertex> simplex = {support(Vec3::UnitX())};
  std::vector<double> bary = {1.0};
  constexpr double kProgressTol = 1e-9;

  for (int iter = 0; iter < 128; ++iter) {
    const Vec3 v = simplex_closest(simplex, bary);
    if (simplex.size() == 4 || v.norm() < 1e-10) {
      blow_up_simplex(simplex, support);
      return epa_penetration(std::move(simplex), support);
    }
    const SupportVertex s = support(-v);
    // Lower bound says no further progress: converged, separated.
    if (v.squaredNorm() - v.dot(s.m) <= kProgressTol * std::max(1.0, v.norm())) {
      NearestResult res;
      res.dist = v.norm();
      res.p_a = Vec3::Zero();
      res.p_b = Vec3::Zero();
      for (size_t i = 0; i < simplex.size(); ++i) {
        res.p_a += bary[i] * simplex[i].a;
        res.p_b += bary[i] * simplex[i].b;
      }
      res.normal = -v.normalized();
      return res;
    }
    simplex.push_back(s);
  }
  throw NumericalFailure("GJK: no convergence after 128 iterations");
}

void world_triangle(const TriMesh& mesh, const std::vector<Vec3>& verts, int f, Vec3 tri[3]) {
  tri[0] = verts[mesh.faces[f][0]];
  tri[1] = verts[mesh.faces[f][1]];
  tri[2] = verts[mesh.faces[f][2]];
}

}  // namespace

std::vector<std::pair<int, int>> broadphase(const std::vector<BodySpec>& specs,
                                            const std::vector<RigidBodyState>& states,
                                            double d_eps) {
  if (d_eps <= 0) throw InvalidInput("broadphase: d_eps must be positive");
  const int n = static_cast<int>(specs.size());
  std::vector<Aabb> boxes(n);
  for (int i = 0; i < n; ++i) {
    boxes[i] = points_aabb(world_vertices(specs[i].mesh, states[i])).inflated(d_eps / 2.0);
  }
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (boxes[i].overlaps(boxes[j])) out.emplace_back(i, j);
    }
  }
  return out;
}

NearestResult nearest_points(const TriMesh& mesh_a, const RigidBodyState& state_a,
                             const TriMesh& mesh_b, const RigidBodyState& state_b) {
  return gjk_nearest(world_vertices(mesh_a, state_a), world_vertices(mesh_b, state_b));
}

double triangle_triangle_distance(const Vec3 tri_a[3], const Vec3 tri_b[3], Vec3& p_a,
                                  Vec3& p_b) {
  if (triangles_intersect(tri_a, tri_b)) {
    p_a = p_b = (tri_a[0] + tri_b[0]) / 2.0;
    return 0.0;
  }
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec3& ca, const Vec3& cb) {
    const double d2 = (ca - cb).squaredNorm();
    if (d2 < best) {
      best = d2;
      p_a = ca;
      p_b = cb;
    }
  };
  for (int k = 0; k < 3; ++k) {
    consider(tri_a[k], closest_on_triangle(tri_a[k], tri_b[0], tri_b[1], tri_b[2]));
    consider(closest_on_triangle(tri_b[k], tri_a[0], tri_a[1], tri_a[2]), tri_b[k]);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Vec3 ca, cb;
      closest_between_segments(tri_a[i], tri_a[(i + 1) % 3], tri_b[j], tri_b[(j + 1) % 3], ca,
                               cb);
      consider(ca, cb);
    }
  }
  return std::sqrt(best);
}

NearestResult brute_force_nearest(const TriMesh& mesh_a, const RigidBodyState& state_a,
                                  const TriMesh& mesh_b, const RigidBodyState& state_b) {
  const auto va = world_vertices(mesh_a, state_a);
  const auto vb = world_vertices(mesh_b, state_b);
  NearestResult res;
  res.dist = std::numeric_limits<double>::infinity();
  for (size_t fa = 0; fa < mesh_a.faces.size(); ++fa) {
    Vec3 ta[3];
    world_triangle(mesh_a, va, static_cast<int>(fa), ta);
    for (size_t fb = 0; fb < mesh_b.faces.size(); ++fb) {
      Vec3 tb[3];
      world_triangle(mesh_b, vb, static_cast<int>(fb), tb);
      Vec3 ca, cb;
      const double d = triangle_triangle_distance(ta, tb, ca, cb);
      if (d < res.dist) {
        res.dist = d;
        res.p_a = ca;
        res.p_b = cb;
      }
    }
  }
  if (res.dist > 0) res.normal = (res.p_b - res.p_a).normalized();
  return res;
}

namespace {

// Deterministic incident-face pick spreading vertices of one body over
// distinct triangles, so vertex-witness contacts rarely collide on keys.
int incident_face_for_vertex(const TriMesh& mesh, int vertex) {
  std::vector<int> incident;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    if (face[0] == vertex || face[1] == vertex || face[2] == vertex) {
      incident.push_back(static_cast<int>(f));
    }
  }
  return incident[vertex % incident.size()];
}

// Vertex-witness contacts of A's vertices inside B's hull (and the
// closest surface point of B), appended with negative dist.
// `dir` is the minimum-translation direction from A into B (the EPA
// normal). Depth is measured along it against B's support plane, so
// shallow face-face overlaps of equal-sized bodies — where every
// penetrating vertex sits exactly on one of B's side planes and the
// nearest-surface distance degenerates to zero — still report their
// true penetration.
void penetration_vertex_contacts(int id_a, int id_b, const TriMesh& mesh_a,
                                 const std::vector<Vec3>& va, const TriMesh& mesh_b,
                                 const std::vector<Vec3>& vb, const Vec3& dir,
                                 std::vector<ContactPair>& out) {
  std::vector<Vec3> normals_b(mesh_b.faces.size());
  for (size_t f = 0; f < mesh_b.faces.size(); ++f) {
    Vec3 tb[3];
    world_triangle(mesh_b, vb, static_cast<int>(f), tb);
    normals_b[f] = (tb[1] - tb[0]).cross(tb[2] - tb[0]).normalized();
  }
  // B's support plane facing A along dir, and the face realizing it.
  double support = std::numeric_limits<double>::infinity();
  for (const Vec3& q : vb) support = std::min(support, dir.dot(q));
  int support_face = 0;
  double best_align = 1.0;
  for (size_t f = 0; f < mesh_b.faces.size(); ++f) {
    const double align = normals_b[f].dot(dir);  // most anti-parallel wins
    if (align < best_align) {
      best_align = align;
      support_face = static_cast<int>(f);
    }
  }
  for (size_t vi = 0; vi < va.size(); ++vi) {
    const Vec3& p = va[vi];
    bool inside = true;
    for (size_t f = 0; f < mesh_b.faces.size() && inside; ++f) {
      if (normals_b[f].dot(p - vb[mesh_b.faces[f][0]]) > 1e-12) inside = false;
    }
    if (!inside) continue;
    const double depth = dir.dot(p) - support;
    if (depth < 1e-12) continue;
    ContactPair pair;
    pair.body_a = id_a;
    pair.body_b = id_b;
    pair.tri_a = incident_face_for_vertex(mesh_a, static_cast<int>(vi));
    pair.tri_b = support_face;
    pair.p_a = p;
    pair.p_b = p - depth * dir;
    pair.dist = -depth;
    pair.normal = dir;  // A-to-B separation direction
    out.push_back(pair);
  }
}

}  // namespace

ContactSet contact_pairs(const std::vector<BodySpec>& specs,
                         const std::vector<RigidBodyState>& states, double d_eps) {
  if (d_eps <= 0) throw InvalidInput("contact_pairs: d_eps must be positive");
  ContactSet set;
  for (const auto& [ia, ib] : broadphase(specs, states, d_eps)) {
    const TriMesh& mesh_a = specs[ia].mesh;
    const TriMesh& mesh_b = specs[ib].mesh;
    const auto va = world_vertices(mesh_a, states[ia]);
    const auto vb = world_vertices(mesh_b, states[ib]);

    // Separated triangle pairs under the threshold.
    std::vector<Aabb> boxes_a(mesh_a.faces.size()), boxes_b(mesh_b.faces.size());
    for (size_t f = 0; f < mesh_a.faces.size(); ++f) {
      Vec3 t[3];
      world_triangle(mesh_a, va, static_cast<int>(f), t);
      Aabb box;
      for (int k = 0; k < 3; ++k) box.grow(t[k]);
      boxes_a[f] = box.inflated(d_eps / 2.0);
    }
    for (size_t f = 0; f < mesh_b.faces.size(); ++f) {
      Vec3 t[3];
      world_triangle(mesh_b, vb, static_cast<int>(f), t);
      Aabb box;
      for (int k = 0; k < 3; ++k) box.grow(t[k]);
      boxes_b[f] = box.inflated(d_eps / 2.0);
    }
    for (size_t fa = 0; fa < mesh_a.faces.size(); ++fa) {
      Vec3 ta[3];
      world_triangle(mesh_a, va, static_cast<int>(fa), ta);
      for (size_t fb = 0; fb < mesh_b.faces.size(); ++fb) {
        if (!boxes_a[fa].overlaps(boxes_b[fb])) continue;
        Vec3 tb[3];
        world_triangle(mesh_b, vb, static_cast<int>(fb), tb);
        Vec3 pa, pb;
        const double d = triangle_triangle_distance(ta, tb, pa, pb);
        if (d <= 0 || d >= d_eps) continue;
        ContactPair pair;
        pair.body_a = ia;
        pair.body_b = ib;
        pair.tri_a = static_cast<int>(fa);
        pair.tri_b = static_cast<int>(fb);
        pair.p_a = pa;
        pair.p_b = pb;
        pair.dist = d;
        pair.normal = (pb - pa) / d;
        set.pairs.push_back(pair);
      }
    }

    // Penetrating hulls contribute vertex-witness contacts on both sides.
    const NearestResult mesh_level = nearest_points(mesh_a, states[ia], mesh_b, states[ib]);
    if (mesh_level.dist <= 0) {
      penetration_vertex_contacts(ia, ib, mesh_a, va, mesh_b, vb, mesh_level.normal, set.pairs);
      std::vector<ContactPair> swapped;
      penetration_vertex_contacts(ib, ia, mesh_b, vb, mesh_a, va, Vec3(-mesh_level.normal),
                                  swapped);
      for (ContactPair pair : swapped) {
        std::swap(pair.body_a, pair.body_b);
        std::swap(pair.tri_a, pair.tri_b);
        std::swap(pair.p_a, pair.p_b);
        pair.normal = -pair.normal;
        set.pairs.push_back(pair);
      }
    }
  }

  std::sort(set.pairs.begin(), set.pairs.end(), [](const ContactPair& a, const ContactPair& b) {
    return std::tie(a.body_a, a.body_b, a.tri_a, a.tri_b, a.dist) <
           std::tie(b.body_a, b.body_b, b.tri_a, b.tri_b, b.dist);
  });
  // Duplicate keys keep the deepest entry.
  std::vector<ContactPair> unique;
  for (const ContactPair& p : set.pairs) {
    if (!unique.empty() && unique.back().body_a == p.body_a && unique.back().body_b == p.body_b &&
        unique.back().tri_a == p.tri_a && unique.back().tri_b == p.tri_b) {
      continue;
    }
    unique.push_back(p);
  }
  set.pairs = std::move(unique);
  set.frozen = true;
  return set;
}

Eigen::Matrix<double, 6, 12> contact_jacobian(const ContactPair& pair,
                                              const RigidBodyState& state_a,
                                              const RigidBodyState& state_b) {
  const Vec3 r_a = pair.p_a - state_a.x;
  const Vec3 r_b = pair.p_b - state_b.x;
  Eigen::Matrix<double, 6, 12> J = Eigen::Matrix<double, 6, 12>::Zero();
  J.block<3, 3>(0, 0) = -Mat3::Identity();
  J.block<3, 3>(0, 3) = skew(r_a);
  J.block<3, 3>(0, 6) = Mat3::Identity();
  J.block<3, 3>(0, 9) = -skew(r_b);
  J.block<3, 6>(3, 0) = -J.block<3, 6>(0, 0);
  J.block<3, 6>(3, 6) = -J.block<3, 6>(0, 6);
  return J;
}

Eigen::Matrix<double, 6, 14> surrogate_gradient(const ContactPair& pair,
                                                const RigidBodyState& state_a,
                                                const RigidBodyState& state_b) {
  return contact_jacobian(pair, state_a, state_b) * kinematic_map_H(state_a.q, state_b.q);
}

std::string dump_contact_set(const ContactSet& set) {
  std::ostringstream out;
  char buf[256];
  for (const ContactPair& p : set.pairs) {
    std::snprintf(buf, sizeof(buf),
                  "%d %d %d %d  %.9g %.9g %.9g  %.9g %.9g %.9g  %.9g\n", p.body_a, p.body_b,
                  p.tri_a, p.tri_b, p.p_a.x(), p.p_a.y(), p.p_a.z(), p.p_b.x(), p.p_b.y(),
                  p.p_b.z(), p.dist);
    out << buf;
  }
  return out.str();
}

}  // namespace rigidgraph
