#pragma once

#include "rigidgraph/collide.hpp"
#include "rigidgraph/datagen.hpp"
#include "rigidgraph/state.hpp"
#include "rigidgraph/tape.hpp"
#include "rigidgraph/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace rigidgraph {

struct GnnConfig {
  int latent = 64;           // node/edge latent width
  int hidden = 64;           // MLP hidden width
  int layers = 5;            // message-passing rounds
  int history = 2;           // velocity history vectors per node
  double noise_std = 1e-4;   // random-walk position noise during training
  double d_eps = 0.01;       // cross-body edge activation distance
  int batch = 16;
  int updates = 5000;
  double lr = 1e-3;
  double lr_decay = 0.1;     // final lr = lr * lr_decay (exponential schedule)
  int val_every = 10;        // every k-th trajectory goes to the validation split
  int threads = 0;           // 0 = hardware concurrency
  unsigned long long seed = 0;

  void validate() const;
};

// Fully-connected network: 2 hidden ReLU layers by construction, with an
// optional output layer normalization.
struct Mlp {
  std::vector<MatX> W;  // W[i] maps width_i -> width_{i+1}
  std::vector<MatX> b;  // 1 x width_{i+1} rows
  bool norm_output = true;

  MatX forward(const MatX& x) const;
};

Mlp make_mlp(int in, int hidden, int out, bool norm_output, std::mt19937_64& rng);

// Per-feature z-scoring rows; std is clamped at 1e-8.
struct FeatureStats {
  VecX mean;
  VecX std;
};

// Static description of a scene's graph: which vertex belongs to which
// body, intra-body mesh edges, and body-centered reference vertices.
struct GraphTopology {
  std::vector<int> node_body;           // mesh node -> body index
  std::vector<int> body_offset;         // body -> first vertex row; size B+1
  std::vector<char> body_dynamic;       // per body
  MatX ref_centered;                    // N x 3, per-body centroid removed
  std::vector<Vec3> ref_centroid;       // per body, body-frame centroid
  std::vector<std::array<int, 2>> mm_edges;  // directed, both orientations
  MatX averaging;                       // B x N row-stochastic centroid map
  VecX dynamic_mask;                    // N x 1, 1 for dynamic-body nodes

  int num_nodes() const { return static_cast<int>(node_body.size()); }
  int num_bodies() const { return static_cast<int>(body_offset.size()) - 1; }
};

GraphTopology build_topology(const std::vector<BodySpec>& specs);

struct GnnModel {
  GnnConfig config;
  Mlp enc_mesh, enc_obj, enc_mm, enc_om, enc_ff;
  struct Layer {
    Mlp mm, om, ff, node_mesh, node_obj;
  };
  std::vector<Layer> layers;
  Mlp decoder;
  FeatureStats mesh_stats, obj_stats, mm_stats, om_stats, ff_stats, target_stats;
};

GnnModel make_model(const GnnConfig& config);

// Flat view of every weight/bias in a fixed traversal order.
std::vector<MatX*> model_params(GnnModel& model);

// Feature matrices for one time step, already normalized by the model's
// statistics. Mesh nodes: velocity history + static flag. Object nodes:
// centroid velocity history + static flag + mass. Edges carry relative
// displacements and norms; cross-body face pairs carry the offsets of
// both triangles' vertices from the nearest points, distance and normal.
struct DynamicsGraph {
  GraphTopology topo;
  ContactSet contacts;
  MatX mesh_feats;                      // N x (3h+1)
  MatX obj_feats;                       // B x (3h+2)
  MatX mm_feats;                        // E x 8
  MatX om_feats;                        // N x 8, vertex -> object direction
  MatX ff_feats_ab, ff_feats_ba;        // K x 22 each
  std::array<std::vector<int>, 3> tri_a, tri_b;  // global vertex rows per contact
};

// frames: history+1 position matrices (N x 3), oldest first.
DynamicsGraph build_graph(const std::vector<BodySpec>& specs, const std::vector<MatX>& frames,
                          const GnnModel& model);

// L rounds of edge/node updates with residuals; returns mesh-node latents.
MatX message_passing(const GnnModel& model, const DynamicsGraph& graph);

// Decoder applied per mesh node, de-normalized by the target statistics.
MatX decode_accelerations(const GnnModel& model, const MatX& latents);

MatX verlet_step(const MatX& p_t, const MatX& p_prev, const MatX& a);

struct ShapeMatchResult {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  MatX projected;
};

// Best-fit rigid transform from ref onto pred (least squares), and the
// rigid projection of pred. Throws NumericalFailure when the covariance
// is rank-deficient (collinear points).
ShapeMatchResult shape_match(const MatX& pred, const MatX& ref);

// Differentiable pieces -------------------------------------------------

// Tape-resident copy of the model parameters, in model_params order.
struct TapeModel {
  std::vector<std::vector<int>> W, b;   // per MLP, matching for_each order
  std::vector<char> norm_output;
  int latent = 0;
  int layers = 0;
};
TapeModel upload_model(Tape& tape, const GnnModel& model);

// Graph whose feature matrices live on the tape. `poses` are 3x4 [R|t]
// tape nodes per body (-1 for static or non-differentiable bodies);
// nearest-point gradients are routed into them.
struct TapeGraph {
  GraphTopology topo;
  ContactSet contacts;
  int mesh_feats = -1, obj_feats = -1, mm_feats = -1, om_feats = -1;
  int ff_ab = -1, ff_ba = -1;
  std::array<std::vector<int>, 3> tri_a, tri_b;  // global vertex rows per contact
};
TapeGraph build_graph_tape(Tape& tape, const GraphTopology& topo,
                           const std::vector<BodySpec>& specs, const std::vector<int>& frames,
                           const std::vector<int>& poses, const GnnModel& model);

// Full forward pass; returns the N x 3 normalized acceleration node.
int gnn_forward_tape(Tape& tape, const TapeModel& model, const TapeGraph& graph);

// Least-squares rigid fit as a custom tape op: input node rows for one
// body, output 3x4 [R | t] against the centered reference block.
int shape_match_tape(Tape& tape, int pred, const MatX& ref_centered);

// Learned rollout. Histories are back-extrapolated from the initial
// velocities; static bodies stay fixed. Throws NumericalFailure with the
// step index when a prediction goes non-finite.
Trajectory gnn_rollout(const GnnModel& model, const SceneState& init, int T);

// Quadratic loss on the final pose of `body`: planar distance to target,
// final planar speed, plus an optional linear probe on the final centroid.
struct RolloutLossSpec {
  int body = 0;
  Vec2 target = Vec2::Zero();
  double distance_weight = 1.0;
  double speed_weight = 0.1;
  Vec3 linear = Vec3::Zero();
};

struct RolloutGradientResult {
  double loss = 0.0;
  Trajectory traj;
  Vec2 grad = Vec2::Zero();  // w.r.t. pusher's initial planar velocity
};

RolloutGradientResult rollout_gradient(const GnnModel& model, const SceneState& init, int T,
                                       const RolloutLossSpec& loss_spec, int pusher_body);

// Training --------------------------------------------------------------

struct TrainResult {
  GnnModel model;            // best validation weights
  std::vector<double> curve;      // training loss per update
  std::vector<double> val_curve;  // validation loss at each evaluation
};

// One-step supervision with random-walk noise; Adam with exponentially
// decaying step size; keeps the weights with the best validation error.
TrainResult train(const Dataset& data, const GnnConfig& config, const GnnModel* init = nullptr);

// Binary checkpoint, versioned header "rigidgraph-model-v1".
void save_model(const GnnModel& model, const std::string& path);
GnnModel load_model(const std::string& path);

}  // namespace rigidgraph
