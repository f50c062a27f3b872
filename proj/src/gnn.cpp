#include "rigidgraph/gnn.hpp"

#include "rigidgraph/rotation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <random>
#include <thread>

namespace rigidgraph {

namespace {

int mesh_feat_dim(int h) { return 3 * h + 1; }
int obj_feat_dim(int h) { return 3 * h + 2; }
constexpr int kMmDim = 8;
constexpr int kOmDim = 8;
constexpr int kFfDim = 22;

FeatureStats identity_stats(int dim) {
  FeatureStats s;
  s.mean = VecX::Zero(dim);
  s.std = VecX::Ones(dim);
  return s;
}

int normalize_tape(Tape& t, int raw, const FeatureStats& stats) {
  const MatX neg_mean = (-stats.mean).transpose();
  MatX istd = stats.std.transpose();
  for (Eigen::Index i = 0; i < istd.cols(); ++i) istd(0, i) = 1.0 / std::max(istd(0, i), 1e-8);
  return t.mul_row(t.add_row(raw, t.leaf(neg_mean)), t.leaf(istd));
}

// Mean of the three triangle-vertex latent rows.
int triangle_mean(Tape& t, int node_latents, const std::vector<int>& v0,
                  const std::vector<int>& v1, const std::vector<int>& v2) {
  const int s = t.add(t.gather_rows(node_latents, v0),
                      t.add(t.gather_rows(node_latents, v1), t.gather_rows(node_latents, v2)));
  return t.scale(s, 1.0 / 3.0);
}

int mlp_forward_tape(Tape& t, const TapeModel& tm, int mlp, int x) {
  const auto& W = tm.W.at(mlp);
  const auto& b = tm.b.at(mlp);
  for (size_t i = 0; i < W.size(); ++i) {
    x = t.add_row(t.matmul(x, W[i]), b[i]);
    if (i + 1 < W.size()) x = t.relu(x);
  }
  if (tm.norm_output.at(mlp)) x = t.layer_norm(x);
  return x;
}

template <class Model, class F>
void for_each_mlp(Model& m, F&& f) {
  f(m.enc_mesh);
  f(m.enc_obj);
  f(m.enc_mm);
  f(m.enc_om);
  f(m.enc_ff);
  for (auto& layer : m.layers) {
    f(layer.mm);
    f(layer.om);
    f(layer.ff);
    f(layer.node_mesh);
    f(layer.node_obj);
  }
  f(m.decoder);
}

// MLP slot indices within the fixed traversal order.
constexpr int kEncMesh = 0, kEncObj = 1, kEncMm = 2, kEncOm = 3, kEncFf = 4;
int layer_base(int l) { return 5 + 5 * l; }
int decoder_slot(int layers) { return 5 + 5 * layers; }

}  // namespace

void GnnConfig::validate() const {
  if (latent < 1 || hidden < 1 || layers < 0 || history < 1) {
    throw InvalidInput("GnnConfig: latent/hidden >= 1, layers >= 0, history >= 1");
  }
  if (batch < 1 || updates < 0 || lr <= 0.0 || lr_decay <= 0.0 || val_every < 1) {
    throw InvalidInput("GnnConfig: batch >= 1, updates >= 0, lr > 0, val_every >= 1");
  }
  if (noise_std < 0.0 || d_eps <= 0.0) {
    throw InvalidInput("GnnConfig: noise_std >= 0 and d_eps > 0 required");
  }
}

MatX Mlp::forward(const MatX& x) const {
  MatX h = x;
  for (size_t i = 0; i < W.size(); ++i) {
    h = (h * W[i]).rowwise() + b[i].row(0);
    if (i + 1 < W.size()) h = h.cwiseMax(0.0);
  }
  if (norm_output) {
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      const double mean = h.row(r).mean();
      const double var = (h.row(r).array() - mean).square().mean();
      h.row(r) = (h.row(r).array() - mean) / std::sqrt(var + 1e-8);
    }
  }
  return h;
}

Mlp make_mlp(int in, int hidden, int out, bool norm_output, std::mt19937_64& rng) {
  Mlp mlp;
  mlp.norm_output = norm_output;
  const std::vector<int> widths = {in, hidden, hidden, out};
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    const double bound = std::sqrt(6.0 / (widths[i] + widths[i + 1]));
    std::uniform_real_distribution<double> uni(-bound, bound);
    MatX W(widths[i], widths[i + 1]);
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = uni(rng);
    }
    mlp.W.push_back(std::move(W));
    mlp.b.push_back(MatX::Zero(1, widths[i + 1]));
  }
  return mlp;
}

GnnModel make_model(const GnnConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed ^ 0x5eed5eed12345678ull);
  GnnModel m;
  m.config = config;
  const int L = config.latent, H = config.hidden, h = config.history;
  m.enc_mesh = make_mlp(mesh_feat_dim(h), H, L, true, rng);
  m.enc_obj = make_mlp(obj_feat_dim(h), H, L, true, rng);
  m.enc_mm = make_mlp(kMmDim, H, L, true, rng);
  m.enc_om = make_mlp(kOmDim, H, L, true, rng);
  m.enc_ff = make_mlp(kFfDim, H, L, true, rng);
  for (int l = 0; l < config.layers; ++l) {
    GnnModel::Layer layer;
    layer.mm = make_mlp(3 * L, H, L, true, rng);
    layer.om = make_mlp(3 * L, H, L, true, rng);
    layer.ff = make_mlp(3 * L, H, L, true, rng);
    layer.node_mesh = make_mlp(2 * L, H, L, true, rng);
    layer.node_obj = make_mlp(2 * L, H, L, true, rng);
    m.layers.push_back(std::move(layer));
  }
  m.decoder = make_mlp(L, H, 3, false, rng);
  // Mean-predicting start: zero final decoder layer, so the de-normalized
  // output is exactly the target mean.
  m.decoder.W.back().setZero();
  m.decoder.b.back().setZero();
  m.mesh_stats = identity_stats(mesh_feat_dim(h));
  m.obj_stats = identity_stats(obj_feat_dim(h));
  m.mm_stats = identity_stats(kMmDim);
  m.om_stats = identity_stats(kOmDim);
  m.ff_stats = identity_stats(kFfDim);
  m.target_stats = identity_stats(3);
  return m;
}

std::vector<MatX*> model_params(GnnModel& model) {
  std::vector<MatX*> out;
  for_each_mlp(model, [&](Mlp& mlp) {
    for (MatX& W : mlp.W) out.push_back(&W);
    for (MatX& b : mlp.b) out.push_back(&b);
  });
  return out;
}

GraphTopology build_topology(const std::vector<BodySpec>& specs) {
  if (specs.empty()) throw InvalidInput("build_topology: no bodies");
  GraphTopology topo;
  topo.body_offset.push_back(0);
  int total = 0;
  for (const BodySpec& spec : specs) total += static_cast<int>(spec.mesh.vertices.size());
  topo.ref_centered.resize(total, 3);
  topo.dynamic_mask.resize(total);
  topo.averaging = MatX::Zero(static_cast<int>(specs.size()), total);
  int row = 0;
  for (int b = 0; b < static_cast<int>(specs.size()); ++b) {
    const TriMesh& mesh = specs[b].mesh;
    const int n = static_cast<int>(mesh.vertices.size());
    if (n < 3) throw InvalidInput("build_topology: body mesh needs >= 3 vertices");
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : mesh.vertices) centroid += v;
    centroid /= n;
    topo.ref_centroid.push_back(centroid);
    topo.body_dynamic.push_back(specs[b].is_static ? 0 : 1);
    for (int i = 0; i < n; ++i) {
      topo.node_body.push_back(b);
      topo.ref_centered.row(row + i) = (mesh.vertices[i] - centroid).transpose();
      topo.dynamic_mask[row + i] = specs[b].is_static ? 0.0 : 1.0;
      topo.averaging(b, row + i) = 1.0 / n;
    }
    for (const std::array<int, 2>& e : mesh.edges()) {
      topo.mm_edges.push_back({row + e[0], row + e[1]});
      topo.mm_edges.push_back({row + e[1], row + e[0]});
    }
    row += n;
    topo.body_offset.push_back(row);
  }
  return topo;
}

TapeModel upload_model(Tape& tape, const GnnModel& model) {
  TapeModel tm;
  tm.latent = model.config.latent;
  tm.layers = model.config.layers;
  for_each_mlp(const_cast<GnnModel&>(model), [&](Mlp& mlp) {
    std::vector<int> w_ids, b_ids;
    for (const MatX& W : mlp.W) w_ids.push_back(tape.leaf(W));
    for (const MatX& b : mlp.b) b_ids.push_back(tape.leaf(b));
    tm.W.push_back(std::move(w_ids));
    tm.b.push_back(std::move(b_ids));
    tm.norm_output.push_back(mlp.norm_output ? 1 : 0);
  });
  return tm;
}

TapeGraph build_graph_tape(Tape& tape, const GraphTopology& topo,
                           const std::vector<BodySpec>& specs, const std::vector<int>& frames,
                           const std::vector<int>& poses, const GnnModel& model) {
  const int h = model.config.history;
  const int N = topo.num_nodes();
  const int B = topo.num_bodies();
  if (static_cast<int>(frames.size()) != h + 1) {
    throw InvalidInput("build_graph_tape: need history+1 frames");
  }
  for (int f : frames) {
    if (tape.val(f).rows() != N || tape.val(f).cols() != 3) {
      throw InvalidInput("build_graph_tape: frame shape mismatch");
    }
  }
  if (static_cast<int>(poses.size()) != B) {
    throw InvalidInput("build_graph_tape: pose list size mismatch");
  }
  TapeGraph g;
  g.topo = topo;

  // Mesh-node features: velocity history (latest first) + static flag.
  std::vector<int> feats;
  for (int k = h; k >= 1; --k) feats.push_back(tape.sub(frames[k], frames[k - 1]));
  const MatX static_col = VecX::Ones(N) - topo.dynamic_mask;
  feats.push_back(tape.leaf(static_col));
  g.mesh_feats = normalize_tape(tape, tape.concat_cols(feats), model.mesh_stats);

  // Object-node features: centroid velocity history + static flag + mass.
  const int avg = tape.leaf(topo.averaging);
  std::vector<int> centroids;
  for (int f : frames) centroids.push_back(tape.matmul(avg, f));
  std::vector<int> ofeats;
  for (int k = h; k >= 1; --k) ofeats.push_back(tape.sub(centroids[k], centroids[k - 1]));
  MatX obj_static(B, 1), obj_mass(B, 1);
  for (int b = 0; b < B; ++b) {
    obj_static(b, 0) = specs[b].is_static ? 1.0 : 0.0;
    obj_mass(b, 0) = specs[b].mass;
  }
  ofeats.push_back(tape.leaf(obj_static));
  ofeats.push_back(tape.leaf(obj_mass));
  g.obj_feats = normalize_tape(tape, tape.concat_cols(ofeats), model.obj_stats);

  const int p_cur = frames.back();

  // Mesh-mesh edges: current and reference relative displacement + norms.
  if (!topo.mm_edges.empty()) {
    std::vector<int> src, dst;
    for (const auto& e : topo.mm_edges) {
      src.push_back(e[0]);
      dst.push_back(e[1]);
    }
    const int d_cur = tape.sub(tape.gather_rows(p_cur, src), tape.gather_rows(p_cur, dst));
    MatX ref_feat(static_cast<int>(topo.mm_edges.size()), 4);
    for (size_t i = 0; i < topo.mm_edges.size(); ++i) {
      const Vec3 d = topo.ref_centered.row(topo.mm_edges[i][0]) -
                     topo.ref_centered.row(topo.mm_edges[i][1]);
      ref_feat.row(i) << d.x(), d.y(), d.z(), d.norm();
    }
    const int raw = tape.concat_cols({d_cur, tape.row_norm(d_cur), tape.leaf(ref_feat)});
    g.mm_feats = normalize_tape(tape, raw, model.mm_stats);
  }

  // Object-mesh edges: one per vertex, offset from the body centroid.
  {
    std::vector<int> body_of(topo.node_body.begin(), topo.node_body.end());
    const int d_cur = tape.sub(p_cur, tape.gather_rows(centroids.back(), body_of));
    MatX ref_feat(N, 4);
    for (int i = 0; i < N; ++i) {
      const Vec3 d = topo.ref_centered.row(i);
      ref_feat.row(i) << d.x(), d.y(), d.z(), d.norm();
    }
    const int raw = tape.concat_cols({d_cur, tape.row_norm(d_cur), tape.leaf(ref_feat)});
    g.om_feats = normalize_tape(tape, raw, model.om_stats);
  }

  // Cross-body face pairs from the frozen contact set at the current frame.
  std::vector<RigidBodyState> states(B);
  for (int b = 0; b < B; ++b) {
    const int lo = topo.body_offset[b], n = topo.body_offset[b + 1] - lo;
    MatX ref(n, 3);
    for (int i = 0; i < n; ++i) ref.row(i) = specs[b].mesh.vertices[i].transpose();
    const ShapeMatchResult sm = shape_match(tape.val(p_cur).middleRows(lo, n), ref);
    states[b].x = sm.t;
    states[b].q = rotmat_to_quat(sm.R);
  }
  g.contacts = contact_pairs(specs, states, model.config.d_eps);
  const int K = static_cast<int>(g.contacts.pairs.size());
  if (K > 0) {
    MatX pa_val(K, 3), pb_val(K, 3), sign_col(K, 1);
    for (int k = 0; k < K; ++k) {
      const ContactPair& pair = g.contacts.pairs[k];
      pa_val.row(k) = pair.p_a.transpose();
      pb_val.row(k) = pair.p_b.transpose();
      sign_col(k, 0) = pair.dist < 0.0 ? -1.0 : 1.0;
      for (int j = 0; j < 3; ++j) {
        g.tri_a[j].push_back(topo.body_offset[pair.body_a] +
                             specs[pair.body_a].mesh.faces[pair.tri_a][j]);
        g.tri_b[j].push_back(topo.body_offset[pair.body_b] +
                             specs[pair.body_b].mesh.faces[pair.tri_b][j]);
      }
    }
    // Witness points as material points of their bodies: gradients are
    // routed to the owning body's pose with the contact set held fixed.
    auto point_node = [&](const MatX& value, bool side_a) {
      const std::vector<ContactPair> pairs = g.contacts.pairs;
      return tape.custom(value, [pairs, poses, side_a](Tape& t, int self) {
        for (size_t k = 0; k < pairs.size(); ++k) {
          const int body = side_a ? pairs[k].body_a : pairs[k].body_b;
          const int pose = poses[body];
          if (pose < 0) continue;
          const Vec3 g_pt = t.grad(self).row(static_cast<int>(k)).transpose();
          const MatX& rt = t.val(pose);
          const Mat3 R = rt.leftCols<3>();
          const Vec3 tr = rt.col(3);
          const Vec3 p = side_a ? pairs[k].p_a : pairs[k].p_b;
          MatX g_pose = MatX::Zero(3, 4);
          g_pose.col(3) = g_pt;
          g_pose.leftCols<3>() = g_pt * ((p - tr).transpose() * R);
          t.add_grad(pose, g_pose);
        }
      });
    };
    const int pa = point_node(pa_val, true);
    const int pb = point_node(pb_val, false);
    const int diff = tape.sub(pb, pa);
    const int dist = tape.mul_col(tape.row_norm(diff), tape.leaf(sign_col));
    const int normal = tape.div_col(diff, dist);
    std::vector<int> off_a, off_b;
    for (int j = 0; j < 3; ++j) {
      off_a.push_back(tape.sub(tape.gather_rows(p_cur, g.tri_a[j]), pa));
      off_b.push_back(tape.sub(tape.gather_rows(p_cur, g.tri_b[j]), pb));
    }
    const int raw_ab = tape.concat_cols(
        {off_b[0], off_b[1], off_b[2], off_a[0], off_a[1], off_a[2], dist, normal});
    const int raw_ba = tape.concat_cols({off_a[0], off_a[1], off_a[2], off_b[0], off_b[1],
                                         off_b[2], dist, tape.scale(normal, -1.0)});
    g.ff_ab = normalize_tape(tape, raw_ab, model.ff_stats);
    g.ff_ba = normalize_tape(tape, raw_ba, model.ff_stats);
  }
  return g;
}

namespace {

// Shared message-passing body; returns the mesh-node latent id.
int gnn_latents_tape(Tape& t, const TapeModel& tm, const TapeGraph& g) {
  const GraphTopology& topo = g.topo;
  const int N = topo.num_nodes();
  int vm = mlp_forward_tape(t, tm, kEncMesh, g.mesh_feats);
  int vo = mlp_forward_tape(t, tm, kEncObj, g.obj_feats);
  int e_mm = g.mm_feats >= 0 ? mlp_forward_tape(t, tm, kEncMm, g.mm_feats) : -1;
  int e_om = mlp_forward_tape(t, tm, kEncOm, g.om_feats);
  int e_ab = g.ff_ab >= 0 ? mlp_forward_tape(t, tm, kEncFf, g.ff_ab) : -1;
  int e_ba = g.ff_ab >= 0 ? mlp_forward_tape(t, tm, kEncFf, g.ff_ba) : -1;

  std::vector<int> mm_src, mm_dst, body_of(topo.node_body.begin(), topo.node_body.end());
  for (const auto& e : topo.mm_edges) {
    mm_src.push_back(e[0]);
    mm_dst.push_back(e[1]);
  }

  for (int l = 0; l < tm.layers; ++l) {
    const int base = layer_base(l);
    int new_mm = -1, new_ab = -1, new_ba = -1;
    if (e_mm >= 0) {
      const int inp = t.concat_cols({e_mm, t.gather_rows(vm, mm_src), t.gather_rows(vm, mm_dst)});
      new_mm = t.add(e_mm, mlp_forward_tape(t, tm, base + 0, inp));
    }
    const int om_inp = t.concat_cols({e_om, vm, t.gather_rows(vo, body_of)});
    const int new_om = t.add(e_om, mlp_forward_tape(t, tm, base + 1, om_inp));
    if (e_ab >= 0) {
      const int send_a = triangle_mean(t, vm, g.tri_a[0], g.tri_a[1], g.tri_a[2]);
      const int send_b = triangle_mean(t, vm, g.tri_b[0], g.tri_b[1], g.tri_b[2]);
      new_ab = t.add(e_ab, mlp_forward_tape(t, tm, base + 2, t.concat_cols({e_ab, send_a, send_b})));
      new_ba = t.add(e_ba, mlp_forward_tape(t, tm, base + 2, t.concat_cols({e_ba, send_b, send_a})));
    }
    // Node updates: sum of incoming edge messages of all types.
    int agg = new_om;
    if (new_mm >= 0) agg = t.add(agg, t.scatter_rows(new_mm, mm_dst, N));
    if (new_ab >= 0) {
      for (int j = 0; j < 3; ++j) {
        agg = t.add(agg, t.scatter_rows(new_ab, g.tri_b[j], N));
        agg = t.add(agg, t.scatter_rows(new_ba, g.tri_a[j], N));
      }
    }
    const int new_vm = t.add(vm, mlp_forward_tape(t, tm, base + 3, t.concat_cols({vm, agg})));
    const int oagg = t.scatter_rows(new_om, body_of, topo.num_bodies());
    const int new_vo = t.add(vo, mlp_forward_tape(t, tm, base + 4, t.concat_cols({vo, oagg})));
    vm = new_vm;
    vo = new_vo;
    e_mm = new_mm;
    e_om = new_om;
    e_ab = new_ab;
    e_ba = new_ba;
  }
  return vm;
}

}  // namespace

int gnn_forward_tape(Tape& tape, const TapeModel& model, const TapeGraph& graph) {
  const int latents = gnn_latents_tape(tape, model, graph);
  return mlp_forward_tape(tape, model, decoder_slot(model.layers), latents);
}

DynamicsGraph build_graph(const std::vector<BodySpec>& specs, const std::vector<MatX>& frames,
                          const GnnModel& model) {
  const GraphTopology topo = build_topology(specs);
  Tape tape;
  std::vector<int> ids;
  for (const MatX& f : frames) ids.push_back(tape.leaf(f));
  const std::vector<int> poses(topo.num_bodies(), -1);
  const TapeGraph g = build_graph_tape(tape, topo, specs, ids, poses, model);
  DynamicsGraph out;
  out.topo = g.topo;
  out.contacts = g.contacts;
  out.tri_a = g.tri_a;
  out.tri_b = g.tri_b;
  out.mesh_feats = tape.val(g.mesh_feats);
  out.obj_feats = tape.val(g.obj_feats);
  if (g.mm_feats >= 0) out.mm_feats = tape.val(g.mm_feats);
  out.om_feats = tape.val(g.om_feats);
  if (g.ff_ab >= 0) {
    out.ff_feats_ab = tape.val(g.ff_ab);
    out.ff_feats_ba = tape.val(g.ff_ba);
  }
  return out;
}

MatX message_passing(const GnnModel& model, const DynamicsGraph& graph) {
  Tape tape;
  const TapeModel tm = upload_model(tape, model);
  TapeGraph g;
  g.topo = graph.topo;
  g.contacts = graph.contacts;
  g.tri_a = graph.tri_a;
  g.tri_b = graph.tri_b;
  g.mesh_feats = tape.leaf(graph.mesh_feats);
  g.obj_feats = tape.leaf(graph.obj_feats);
  if (graph.mm_feats.rows() > 0) g.mm_feats = tape.leaf(graph.mm_feats);
  g.om_feats = tape.leaf(graph.om_feats);
  if (graph.ff_feats_ab.rows() > 0) {
    g.ff_ab = tape.leaf(graph.ff_feats_ab);
    g.ff_ba = tape.leaf(graph.ff_feats_ba);
  }
  return tape.val(gnn_latents_tape(tape, tm, g));
}

MatX decode_accelerations(const GnnModel& model, const MatX& latents) {
  MatX acc = model.decoder.forward(latents);
  for (Eigen::Index c = 0; c < 3; ++c) {
    acc.col(c) = acc.col(c).array() * std::max(model.target_stats.std[c], 1e-8) +
                 model.target_stats.mean[c];
  }
  return acc;
}

MatX verlet_step(const MatX& p_t, const MatX& p_prev, const MatX& a) {
  if (p_t.rows() != p_prev.rows() || p_t.rows() != a.rows() || p_t.cols() != p_prev.cols() ||
      p_t.cols() != a.cols()) {
    throw InvalidInput("verlet_step: shape mismatch");
  }
  return 2.0 * p_t - p_prev + a;
}

ShapeMatchResult shape_match(const MatX& pred, const MatX& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != 3 || ref.cols() != 3 || pred.rows() < 3) {
    throw InvalidInput("shape_match: need matching N x 3 inputs, N >= 3");
  }
  const Eigen::RowVector3d c = pred.colwise().mean();
  const Eigen::RowVector3d c0 = ref.colwise().mean();
  const Mat3 A = (pred.rowwise() - c).transpose() * (ref.rowwise() - c0);
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0))) {
    throw NumericalFailure("shape_match: degenerate point distribution");
  }
  const Mat3 UVt = svd.matrixU() * svd.matrixV().transpose();
  Vec3 d(1.0, 1.0, UVt.determinant() < 0.0 ? -1.0 : 1.0);
  ShapeMatchResult out;
  out.R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  out.t = c.transpose() - out.R * c0.transpose();
  out.projected = (ref.rowwise() - c0) * out.R.transpose();
  out.projected.rowwise() += c;
  return out;
}

namespace {

Vec3 vee2(const Mat3& m) {
  return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

}  // namespace

int shape_match_tape(Tape& tape, int pred, const MatX& ref_centered) {
  const MatX& x = tape.val(pred);
  const int n = static_cast<int>(x.rows());
  if (n != ref_centered.rows() || x.cols() != 3) {
    throw InvalidInput("shape_match_tape: shape mismatch");
  }
  const Eigen::RowVector3d c = x.colwise().mean();
  const Mat3 A = (x.rowwise() - c).transpose() * ref_centered;
  Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0))) {
    throw NumericalFailure("shape_match_tape: degenerate point distribution");
  }
  const Mat3 UVt = svd.matrixU() * svd.matrixV().transpose();
  const Vec3 d(1.0, 1.0, UVt.determinant() < 0.0 ? -1.0 : 1.0);
  const Mat3 R = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  MatX out(3, 4);
  out.leftCols<3>() = R;
  out.col(3) = c.transpose();
  // dR = R [K^-1 vee2(R^T dA)]_x with K = tr(S) I - S, S = R^T A symmetric;
  // the adjoint maps rotation gradients back through A = sum x_i ref_i^T
  // and the translation gradient through the centroid.
  const Mat3 S = 0.5 * (R.transpose() * A + (R.transpose() * A).transpose());
  const Mat3 K = S.trace() * Mat3::Identity() - S;
  const MatX ref = ref_centered;
  return tape.custom(std::move(out), [pred, R, K, ref, n](Tape& t, int self) {
    const MatX& g = t.grad(self);
    const Mat3 g_r = g.leftCols<3>();
    const Vec3 g_t = g.col(3);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(K);
    if (eig.info() != Eigen::Success) {
      throw NumericalFailure("shape_match_tape: eigensolver failed in backward");
    }
    const Vec3 y = vee2(Mat3(R.transpose() * g_r));
    const double lam_max = eig.eigenvalues().cwiseAbs().maxCoeff();
    Vec3 w = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
      const double lam = eig.eigenvalues()(i);
      if (std::abs(lam) > 1e-8 * std::max(1.0, lam_max)) {
        const Vec3 q = eig.eigenvectors().col(i);
        w += q * (q.dot(y) / lam);
      }
    }
    const Mat3 g_a = R * skew(w);
    MatX gx = ref * g_a.transpose();
    gx.rowwise() += (g_t / n).transpose();
    t.add_grad(pred, gx);
  });
}

namespace {

struct StepOut {
  int p_proj = -1;
  std::vector<int> pose_ids;
  std::vector<Pose> poses;
};

StepOut step_on_tape(Tape& t, const GnnModel& model, const TapeModel& tm,
                     const GraphTopology& topo, const std::vector<BodySpec>& specs,
                     const std::vector<int>& frames, const std::vector<int>& pose_ids,
                     int step_index) {
  const int N = topo.num_nodes();
  const int B = topo.num_bodies();
  const TapeGraph g = build_graph_tape(t, topo, specs, frames, pose_ids, model);
  const int acc_norm = gnn_forward_tape(t, tm, g);
  MatX std_row(1, 3), mean_row(1, 3);
  for (int c = 0; c < 3; ++c) {
    std_row(0, c) = std::max(model.target_stats.std[c], 1e-8);
    mean_row(0, c) = model.target_stats.mean[c];
  }
  const int acc = t.add_row(t.mul_row(acc_norm, t.leaf(std_row)), t.leaf(mean_row));
  const int p_cur = frames.back();
  const int p_prev = frames[frames.size() - 2];
  const int delta = t.add(t.sub(p_cur, p_prev), acc);
  const int p_next = t.add(p_cur, t.mul_col(delta, t.leaf(topo.dynamic_mask)));
  if (!t.val(p_next).allFinite()) {
    throw NumericalFailure("gnn rollout: non-finite prediction at step " +
                           std::to_string(step_index));
  }
  StepOut out;
  out.pose_ids.assign(B, -1);
  out.poses.resize(B);
  const MatX static_col = VecX::Ones(N) - topo.dynamic_mask;
  int p_proj = t.mul_col(p_next, t.leaf(static_col));
  for (int b = 0; b < B; ++b) {
    const int lo = topo.body_offset[b];
    const int n = topo.body_offset[b + 1] - lo;
    if (!topo.body_dynamic[b]) {
      MatX ref(n, 3);
      for (int i = 0; i < n; ++i) ref.row(i) = specs[b].mesh.vertices[i].transpose();
      const ShapeMatchResult sm = shape_match(t.val(p_next).middleRows(lo, n), ref);
      out.poses[b] = {sm.t, rotmat_to_quat(sm.R)};
      continue;
    }
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = lo + i;
    const MatX ref_b = topo.ref_centered.middleRows(lo, n);
    const int pose34 = shape_match_tape(t, t.gather_rows(p_next, idx), ref_b);
    const int tr34 = t.transpose(pose34);
    const int rt = t.gather_rows(tr34, {0, 1, 2});
    const int trow = t.gather_rows(tr34, {3});
    const int proj = t.add_row(t.matmul(t.leaf(ref_b), rt), trow);
    p_proj = t.add(p_proj, t.scatter_rows(proj, idx, N));
    out.pose_ids[b] = pose34;
    const MatX& rtval = t.val(pose34);
    const Mat3 R = rtval.leftCols<3>();
    const Vec3 tr_vec = rtval.col(3);
    out.poses[b] = {tr_vec - R * topo.ref_centroid[b], rotmat_to_quat(R)};
  }
  out.p_proj = p_proj;
  return out;
}

// Clean frame stacks: world vertices at t=0 and translationally
// back-extrapolated history frames, oldest first.
std::vector<MatX> initial_frames(const GraphTopology& topo, const SceneState& init) {
  const int N = topo.num_nodes();
  MatX p0(N, 3);
  for (int b = 0; b < topo.num_bodies(); ++b) {
    const std::vector<Vec3> wv = world_vertices(init.specs[b].mesh, init.states[b]);
    for (size_t i = 0; i < wv.size(); ++i) p0.row(topo.body_offset[b] + i) = wv[i].transpose();
  }
  return {p0};
}

MatX frame_from_poses(const GraphTopology& topo, const std::vector<BodySpec>& specs,
                      const std::vector<Pose>& poses) {
  MatX p(topo.num_nodes(), 3);
  for (int b = 0; b < topo.num_bodies(); ++b) {
    const Mat3 R = quat_to_rotmat(poses[b].q);
    const int lo = topo.body_offset[b];
    for (size_t i = 0; i < specs[b].mesh.vertices.size(); ++i) {
      p.row(lo + i) = (R * specs[b].mesh.vertices[i] + poses[b].x).transpose();
    }
  }
  return p;
}

}  // namespace

Trajectory gnn_rollout(const GnnModel& model, const SceneState& init, int T) {
  if (T < 1) throw InvalidInput("gnn_rollout: T must be >= 1");
  if (init.specs.size() != init.states.size()) throw InvalidInput("gnn_rollout: scene mismatch");
  const GraphTopology topo = build_topology(init.specs);
  const int h = model.config.history;
  const MatX p0 = initial_frames(topo, init)[0];
  std::vector<MatX> frames;
  for (int k = h; k >= 1; --k) {
    MatX p = p0;
    for (int b = 0; b < topo.num_bodies(); ++b) {
      const Vec3 off = -k * init.dt * init.states[b].v;
      p.middleRows(topo.body_offset[b], topo.body_offset[b + 1] - topo.body_offset[b])
          .rowwise() += off.transpose();
    }
    frames.push_back(std::move(p));
  }
  frames.push_back(p0);

  Trajectory traj;
  traj.specs = init.specs;
  traj.dt = init.dt;
  std::vector<Pose> frame0;
  for (const RigidBodyState& s : init.states) frame0.push_back({s.x, s.q});
  traj.frames.push_back(frame0);
  for (int step = 0; step < T; ++step) {
    Tape tape;
    const TapeModel tm = upload_model(tape, model);
    std::vector<int> ids;
    for (const MatX& f : frames) ids.push_back(tape.leaf(f));
    const std::vector<int> poses(topo.num_bodies(), -1);
    const StepOut out = step_on_tape(tape, model, tm, topo, init.specs, ids, poses, step);
    traj.frames.push_back(out.poses);
    frames.erase(frames.begin());
    frames.push_back(tape.val(out.p_proj));
  }
  return traj;
}

RolloutGradientResult rollout_gradient(const GnnModel& model, const SceneState& init, int T,
                                       const RolloutLossSpec& loss_spec, int pusher_body) {
  if (T < 1) throw InvalidInput("rollout_gradient: T must be >= 1");
  const int B = static_cast<int>(init.specs.size());
  if (loss_spec.body < 0 || loss_spec.body >= B) {
    throw InvalidInput("rollout_gradient: loss body out of range");
  }
  if (pusher_body < 0 || pusher_body >= B || init.specs[pusher_body].is_static) {
    throw InvalidInput("rollout_gradient: pusher must be a dynamic body");
  }
  const GraphTopology topo = build_topology(init.specs);
  const int N = topo.num_nodes();
  const int h = model.config.history;

  Tape tape;
  const TapeModel tm = upload_model(tape, model);
  const int vel = tape.leaf(init.states[pusher_body].v.transpose());  // 1 x 3
  MatX pusher_col = MatX::Zero(N, 1);
  for (int i = topo.body_offset[pusher_body]; i < topo.body_offset[pusher_body + 1]; ++i) {
    pusher_col(i, 0) = 1.0;
  }
  const int pusher_mask = tape.leaf(pusher_col);
  const int ones_col = tape.leaf(MatX::Ones(N, 1));
  const MatX p0 = initial_frames(topo, init)[0];

  std::vector<int> frames;
  for (int k = h; k >= 1; --k) {
    MatX base = p0;
    for (int b = 0; b < B; ++b) {
      if (b == pusher_body) continue;
      base.middleRows(topo.body_offset[b], topo.body_offset[b + 1] - topo.body_offset[b])
          .rowwise() += (-k * init.dt * init.states[b].v).transpose();
    }
    const int off = tape.scale(vel, -k * init.dt);
    frames.push_back(tape.add(tape.leaf(base), tape.mul_col(tape.matmul(ones_col, off),
                                                            pusher_mask)));
  }
  frames.push_back(tape.leaf(p0));

  RolloutGradientResult result;
  result.traj.specs = init.specs;
  result.traj.dt = init.dt;
  std::vector<Pose> frame0;
  for (const RigidBodyState& s : init.states) frame0.push_back({s.x, s.q});
  result.traj.frames.push_back(frame0);

  std::vector<int> pose_ids(B, -1);
  for (int step = 0; step < T; ++step) {
    std::vector<int> window(frames.end() - (h + 1), frames.end());
    const StepOut out = step_on_tape(tape, model, tm, topo, init.specs, window, pose_ids, step);
    result.traj.frames.push_back(out.poses);
    pose_ids = out.pose_ids;
    frames.push_back(out.p_proj);
  }

  const int avg_row = tape.leaf(MatX(topo.averaging.row(loss_spec.body)));
  const int c_final = tape.matmul(avg_row, frames.back());
  const int c_prev = tape.matmul(avg_row, frames[frames.size() - 2]);
  MatX planar(1, 3);
  planar << 1.0, 1.0, 0.0;
  const int planar_row = tape.leaf(planar);
  MatX target(1, 3);
  target << loss_spec.target.x(), loss_spec.target.y(), 0.0;
  const int dplan = tape.mul_row(tape.sub(c_final, tape.leaf(target)), planar_row);
  const int dist = tape.mean_sq(tape.row_norm(dplan));
  const int vplan =
      tape.mul_row(tape.scale(tape.sub(c_final, c_prev), 1.0 / init.dt), planar_row);
  const int speed = tape.mean_sq(tape.row_norm(vplan));
  const int lin = tape.matmul(c_final, tape.leaf(MatX(loss_spec.linear)));
  const int loss = tape.add(
      tape.add(tape.scale(dist, loss_spec.distance_weight), tape.scale(speed, loss_spec.speed_weight)),
      lin);
  result.loss = tape.val(loss)(0, 0);
  tape.backward(loss);
  result.grad = Vec2(tape.grad(vel)(0, 0), tape.grad(vel)(0, 1));
  return result;
}

// Training ---------------------------------------------------------------

namespace {

struct TrainSample {
  int traj = 0;
  int t = 0;  // index of the current frame; history behind, target ahead
};

struct PreparedData {
  std::vector<GraphTopology> topos;                // per trajectory
  std::vector<std::vector<MatX>> frames;           // per trajectory, per time
  std::vector<TrainSample> train_samples, val_samples;
};

PreparedData prepare(const Dataset& data, const GnnConfig& config) {
  if (data.trajectories.empty()) throw InvalidInput("train: empty dataset");
  PreparedData prep;
  const int h = config.history;
  for (size_t j = 0; j < data.trajectories.size(); ++j) {
    const Trajectory& traj = data.trajectories[j];
    GraphTopology topo = build_topology(traj.specs);
    std::vector<MatX> frames;
    for (const std::vector<Pose>& poses : traj.frames) {
      frames.push_back(frame_from_poses(topo, traj.specs, poses));
    }
    const bool val = (static_cast<int>(j) % config.val_every) == config.val_every - 1;
    for (int t = h; t + 1 < static_cast<int>(frames.size()); ++t) {
      TrainSample s{static_cast<int>(j), t};
      (val ? prep.val_samples : prep.train_samples).push_back(s);
    }
    prep.topos.push_back(std::move(topo));
    prep.frames.push_back(std::move(frames));
  }
  if (prep.train_samples.empty()) throw InvalidInput("train: no usable training windows");
  if (prep.val_samples.empty()) prep.val_samples = prep.train_samples;
  return prep;
}

struct StatsAcc {
  VecX sum, sumsq;
  long long count = 0;
  void init(int dim) {
    sum = VecX::Zero(dim);
    sumsq = VecX::Zero(dim);
  }
  void add(const MatX& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      sum += rows.row(r).transpose();
      sumsq += rows.row(r).transpose().cwiseAbs2();
      ++count;
    }
  }
  FeatureStats finish() const {
    FeatureStats s;
    if (count == 0) {
      s.mean = VecX::Zero(sum.size());
      s.std = VecX::Ones(sum.size());
      return s;
    }
    s.mean = sum / static_cast<double>(count);
    s.std = (sumsq / static_cast<double>(count) - s.mean.cwiseAbs2())
                .cwiseMax(0.0)
                .cwiseSqrt()
                .cwiseMax(1e-8);
    return s;
  }
};

// Noisy history window plus the normalized one-step target.
struct SampleTensors {
  std::vector<MatX> frames;
  MatX target_norm;
};

SampleTensors make_sample(const PreparedData& prep, const TrainSample& s, const GnnConfig& config,
                          const FeatureStats& target_stats, double noise_std,
                          unsigned long long seed) {
  const int h = config.history;
  const GraphTopology& topo = prep.topos[s.traj];
  SampleTensors out;
  for (int k = h; k >= 0; --k) out.frames.push_back(prep.frames[s.traj][s.t - k]);
  if (noise_std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise_std / std::sqrt(static_cast<double>(h + 1)));
    MatX walk = MatX::Zero(topo.num_nodes(), 3);
    for (MatX& frame : out.frames) {
      for (Eigen::Index r = 0; r < walk.rows(); ++r) {
        if (topo.dynamic_mask[r] == 0.0) continue;
        for (int c = 0; c < 3; ++c) walk(r, c) += gauss(rng);
      }
      frame += walk;
    }
  }
  const MatX& next = prep.frames[s.traj][s.t + 1];
  const MatX raw = next - 2.0 * out.frames[h] + out.frames[h - 1];
  out.target_norm = raw;
  for (int c = 0; c < 3; ++c) {
    out.target_norm.col(c) =
        (raw.col(c).array() - target_stats.mean[c]) / std::max(target_stats.std[c], 1e-8);
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& data, const GnnConfig& config, const GnnModel* init) {
  config.validate();
  const PreparedData prep = prepare(data, config);
  const int h = config.history;

  // Pass 1: feature and target statistics from clean training windows.
  GnnModel raw_model = make_model(config);  // identity statistics
  StatsAcc mesh_acc, obj_acc, mm_acc, om_acc, ff_acc, tgt_acc;
  mesh_acc.init(mesh_feat_dim(h));
  obj_acc.init(obj_feat_dim(h));
  mm_acc.init(kMmDim);
  om_acc.init(kOmDim);
  ff_acc.init(kFfDim);
  tgt_acc.init(3);
  const size_t n_train = prep.train_samples.size();
  const size_t stat_stride = std::max<size_t>(1, n_train / 2000);
  for (size_t i = 0; init == nullptr && i < n_train; i += stat_stride) {
    const TrainSample& s = prep.train_samples[i];
    Tape tape;
    std::vector<int> ids;
    for (int k = h; k >= 0; --k) ids.push_back(tape.leaf(prep.frames[s.traj][s.t - k]));
    const std::vector<int> poses(prep.topos[s.traj].num_bodies(), -1);
    const TapeGraph g = build_graph_tape(tape, prep.topos[s.traj],
                                         data.trajectories[s.traj].specs, ids, poses, raw_model);
    mesh_acc.add(tape.val(g.mesh_feats));
    obj_acc.add(tape.val(g.obj_feats));
    if (g.mm_feats >= 0) mm_acc.add(tape.val(g.mm_feats));
    om_acc.add(tape.val(g.om_feats));
    if (g.ff_ab >= 0) {
      ff_acc.add(tape.val(g.ff_ab));
      ff_acc.add(tape.val(g.ff_ba));
    }
    tgt_acc.add(prep.frames[s.traj][s.t + 1] - 2.0 * prep.frames[s.traj][s.t] +
                prep.frames[s.traj][s.t - 1]);
  }

  TrainResult result;
  if (init != nullptr) {
    if (init->config.latent != config.latent || init->config.hidden != config.hidden ||
        init->config.layers != config.layers || init->config.history != config.history) {
      throw InvalidInput("train: warm-start checkpoint architecture does not match the config");
    }
    result.model = *init;  // keep the checkpoint's weights and statistics
    result.model.config = config;
  } else {
    result.model = make_model(config);
    result.model.mesh_stats = mesh_acc.finish();
    result.model.obj_stats = obj_acc.finish();
    result.model.mm_stats = mm_acc.finish();
    result.model.om_stats = om_acc.finish();
    result.model.ff_stats = ff_acc.finish();
    result.model.target_stats = tgt_acc.finish();
  }
  GnnModel& model = result.model;

  // Evaluates mean one-step error over a deterministic validation subset.
  const auto eval_loss = [&](const GnnModel& m, const std::vector<TrainSample>& samples,
                             size_t cap) {
    const size_t stride = std::max<size_t>(1, samples.size() / std::max<size_t>(cap, 1));
    double total = 0.0;
    int n = 0;
    for (size_t i = 0; i < samples.size(); i += stride) {
      const TrainSample& s = samples[i];
      const SampleTensors tensors = make_sample(prep, s, config, m.target_stats, 0.0, 0);
      Tape tape;
      const TapeModel tm = upload_model(tape, m);
      std::vector<int> ids;
      for (const MatX& f : tensors.frames) ids.push_back(tape.leaf(f));
      const std::vector<int> poses(prep.topos[s.traj].num_bodies(), -1);
      const TapeGraph g = build_graph_tape(tape, prep.topos[s.traj],
                                           data.trajectories[s.traj].specs, ids, poses, m);
      const int acc = gnn_forward_tape(tape, tm, g);
      const int loss = tape.mean_sq(tape.sub(acc, tape.leaf(tensors.target_norm)));
      total += tape.val(loss)(0, 0);
      ++n;
    }
    return total / std::max(n, 1);
  };

  std::vector<MatX*> params = model_params(model);
  std::vector<MatX> adam_m, adam_v;
  for (MatX* p : params) {
    adam_m.push_back(MatX::Zero(p->rows(), p->cols()));
    adam_v.push_back(MatX::Zero(p->rows(), p->cols()));
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<size_t> pick(0, n_train - 1);
  const int n_workers = std::max(
      1, config.threads > 0 ? config.threads
                            : static_cast<int>(std::thread::hardware_concurrency()));
  GnnModel best = model;
  double best_val = eval_loss(model, prep.val_samples, 128);
  result.val_curve.push_back(best_val);
  const int eval_interval = std::max(1, config.updates / 25);

  for (int update = 0; update < config.updates; ++update) {
    std::vector<TrainSample> batch;
    std::vector<unsigned long long> seeds;
    for (int i = 0; i < config.batch; ++i) {
      batch.push_back(prep.train_samples[pick(rng)]);
      seeds.push_back(rng());
    }
    // Per-sample tapes run concurrently; gradients are reduced in sample
    // order so results are independent of scheduling.
    std::vector<std::future<std::pair<double, std::vector<MatX>>>> futures;
    const auto run_sample = [&](int i) {
      const TrainSample& s = batch[i];
      const SampleTensors tensors =
          make_sample(prep, s, config, model.target_stats, config.noise_std, seeds[i]);
      Tape tape;
      const TapeModel tm = upload_model(tape, model);
      std::vector<int> ids;
      for (const MatX& f : tensors.frames) ids.push_back(tape.leaf(f));
      const std::vector<int> poses(prep.topos[s.traj].num_bodies(), -1);
      const TapeGraph g = build_graph_tape(tape, prep.topos[s.traj],
                                           data.trajectories[s.traj].specs, ids, poses, model);
      const int acc = gnn_forward_tape(tape, tm, g);
      const int loss = tape.mean_sq(tape.sub(acc, tape.leaf(tensors.target_norm)));
      tape.backward(loss);
      std::vector<MatX> grads;
      for (size_t m_i = 0; m_i < tm.W.size(); ++m_i) {
        for (int id : tm.W[m_i]) grads.push_back(tape.grad(id));
        for (int id : tm.b[m_i]) grads.push_back(tape.grad(id));
      }
      return std::make_pair(tape.val(loss)(0, 0), std::move(grads));
    };
    std::vector<std::pair<double, std::vector<MatX>>> results(config.batch);
    for (int start = 0; start < config.batch; start += n_workers) {
      futures.clear();
      const int end = std::min(config.batch, start + n_workers);
      for (int i = start; i < end; ++i) {
        futures.push_back(std::async(std::launch::async, run_sample, i));
      }
      for (int i = start; i < end; ++i) results[i] = futures[i - start].get();
    }
    double batch_loss = 0.0;
    std::vector<MatX> grads;
    for (int i = 0; i < config.batch; ++i) {
      batch_loss += results[i].first;
      if (grads.empty()) {
        grads = std::move(results[i].second);
      } else {
        for (size_t k = 0; k < grads.size(); ++k) grads[k] += results[i].second[k];
      }
    }
    batch_loss /= config.batch;
    result.curve.push_back(batch_loss);
    const double inv_batch = 1.0 / config.batch;
    const double lr_t =
        config.lr * std::pow(config.lr_decay,
                             config.updates > 1 ? static_cast<double>(update) / (config.updates - 1)
                                                : 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, update + 1);
    const double bc2 = 1.0 - std::pow(b2, update + 1);
    for (size_t k = 0; k < params.size(); ++k) {
      const MatX g = grads[k] * inv_batch;
      adam_m[k] = b1 * adam_m[k] + (1.0 - b1) * g;
      adam_v[k] = b2 * adam_v[k] + (1.0 - b2) * g.cwiseAbs2();
      params[k]->noalias() -=
          lr_t * ((adam_m[k] / bc1).array() / ((adam_v[k] / bc2).array().sqrt() + eps)).matrix();
    }
    if ((update + 1) % eval_interval == 0 || update + 1 == config.updates) {
      const double val = eval_loss(model, prep.val_samples, 128);
      result.val_curve.push_back(val);
      if (val < best_val) {
        best_val = val;
        best = model;
      }
    }
  }
  if (config.updates > 0) result.model = best;
  return result;
}

// Checkpoint I/O ---------------------------------------------------------

namespace {

void write_u64(std::ostream& os, std::uint64_t x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}
void write_f64(std::ostream& os, double x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}
double read_f64(std::istream& is) {
  double x = 0;
  is.read(reinterpret_cast<char*>(&x), sizeof(x));
  return x;
}
void write_mat(std::ostream& os, const MatX& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
  }
}
MatX read_mat(std::istream& is) {
  const auto rows = static_cast<Eigen::Index>(read_u64(is));
  const auto cols = static_cast<Eigen::Index>(read_u64(is));
  if (!is || rows < 0 || cols < 0 || rows > (1 << 24) || cols > (1 << 24)) {
    throw InvalidInput("load_model: corrupt matrix header");
  }
  MatX m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_f64(is);
  }
  return m;
}
void write_stats(std::ostream& os, const FeatureStats& s) {
  write_mat(os, s.mean.transpose());
  write_mat(os, s.std.transpose());
}
FeatureStats read_stats(std::istream& is) {
  FeatureStats s;
  s.mean = read_mat(is).transpose();
  s.std = read_mat(is).transpose();
  return s;
}

constexpr char kModelHeader[] = "rigidgraph-model-v1";

}  // namespace

void save_model(const GnnModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("save_model: cannot open " + path);
  os << kModelHeader << '\n';
  write_u64(os, static_cast<std::uint64_t>(model.config.latent));
  write_u64(os, static_cast<std::uint64_t>(model.config.hidden));
  write_u64(os, static_cast<std::uint64_t>(model.config.layers));
  write_u64(os, static_cast<std::uint64_t>(model.config.history));
  write_u64(os, static_cast<std::uint64_t>(model.config.batch));
  write_u64(os, static_cast<std::uint64_t>(model.config.updates));
  write_u64(os, static_cast<std::uint64_t>(model.config.val_every));
  write_u64(os, model.config.seed);
  write_f64(os, model.config.noise_std);
  write_f64(os, model.config.d_eps);
  write_f64(os, model.config.lr);
  write_f64(os, model.config.lr_decay);
  GnnModel& m = const_cast<GnnModel&>(model);
  std::uint64_t n_mlps = 0;
  for_each_mlp(m, [&](Mlp&) { ++n_mlps; });
  write_u64(os, n_mlps);
  for_each_mlp(m, [&](Mlp& mlp) {
    write_u64(os, mlp.norm_output ? 1 : 0);
    write_u64(os, static_cast<std::uint64_t>(mlp.W.size()));
    for (size_t i = 0; i < mlp.W.size(); ++i) {
      write_mat(os, mlp.W[i]);
      write_mat(os, mlp.b[i]);
    }
  });
  write_stats(os, model.mesh_stats);
  write_stats(os, model.obj_stats);
  write_stats(os, model.mm_stats);
  write_stats(os, model.om_stats);
  write_stats(os, model.ff_stats);
  write_stats(os, model.target_stats);
  if (!os) throw NumericalFailure("save_model: write failed for " + path);
}

GnnModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("load_model: cannot open " + path);
  std::string header;
  std::getline(is, header);
  if (header != kModelHeader) throw InvalidInput("load_model: bad header in " + path);
  GnnConfig config;
  config.latent = static_cast<int>(read_u64(is));
  config.hidden = static_cast<int>(read_u64(is));
  config.layers = static_cast<int>(read_u64(is));
  config.history = static_cast<int>(read_u64(is));
  config.batch = static_cast<int>(read_u64(is));
  config.updates = static_cast<int>(read_u64(is));
  config.val_every = static_cast<int>(read_u64(is));
  config.seed = read_u64(is);
  config.noise_std = read_f64(is);
  config.d_eps = read_f64(is);
  config.lr = read_f64(is);
  config.lr_decay = read_f64(is);
  GnnModel model = make_model(config);
  const std::uint64_t n_mlps = read_u64(is);
  std::uint64_t expected = 0;
  for_each_mlp(model, [&](Mlp&) { ++expected; });
  if (n_mlps != expected) throw InvalidInput("load_model: layer count mismatch");
  for_each_mlp(model, [&](Mlp& mlp) {
    mlp.norm_output = read_u64(is) != 0;
    const auto n = static_cast<size_t>(read_u64(is));
    mlp.W.resize(n);
    mlp.b.resize(n);
    for (size_t i = 0; i < n; ++i) {
      mlp.W[i] = read_mat(is);
      mlp.b[i] = read_mat(is);
    }
  });
  model.mesh_stats = read_stats(is);
  model.obj_stats = read_stats(is);
  model.mm_stats = read_stats(is);
  model.om_stats = read_stats(is);
  model.ff_stats = read_stats(is);
  model.target_stats = read_stats(is);
  if (!is) throw InvalidInput("load_model: truncated file " + path);
  return model;
}

}  // namespace rigidgraph
