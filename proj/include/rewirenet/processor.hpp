#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rewirenet/meshgraph.hpp"
#include "rewirenet/mlp.hpp"
#include "rewirenet/rewiring.hpp"

namespace rewirenet {

/// Which dynamic quantities are modeled. Velocity is always present.
///
/// Node input layout: [vx, vy, (p), (rho), onehot(type) x 4].
/// Edge input layout: [dx, dy, |d|] with d = pos(receiver) - pos(sender).
/// Output layout: [dvx, dvy, (dp), (drho)].
struct FeatureLayout {
  bool pressure = false;
  bool density = false;

  int dynamic_dim() const { return 2 + (pressure ? 1 : 0) + (density ? 1 : 0); }
  int node_input_dim() const { return dynamic_dim() + kNodeTypeCount; }
  static constexpr int edge_input_dim() { return 3; }
  int output_dim() const { return dynamic_dim(); }

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

FeatureLayout layout_of(const FrameState& frame);

/// Per-feature z-score statistics; identity when mean = 0 and std = 1.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static FeatureStats identity(int dim);
  /// Column statistics of `samples`, std floored at 1e-8.
  static FeatureStats fit(const Eigen::MatrixXd& samples);

  Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& x) const;
};

struct ModelConfig {
  int layers = 6;
  int hidden_dim = 32;
  int mlp_hidden_layers = 1;  // hidden layers inside each MLP
  Activation activation = Activation::relu;
  bool residual = true;
  FeatureLayout features;

  void validate() const;
};

struct BlockParams {
  MlpParams edge_mlp;  // f_E: [e_ij, h_i, h_j] -> H
  MlpParams node_mlp;  // f_V: [h_i, sum_j w_ij e_ij] -> H
};

/// All trainable weights plus the frozen normalization statistics.
struct ProcessorParams {
  MlpParams node_encoder;
  MlpParams edge_encoder;
  std::vector<BlockParams> blocks;
  MlpParams decoder;
  int hidden_dim = 0;
  int layers = 0;
  bool residual = true;
  FeatureLayout features;
  FeatureStats node_stats;
  FeatureStats edge_stats;
  FeatureStats target_stats;

  void validate() const;

  template <class F>
  void for_each_tensor(F&& f) {
    node_encoder.for_each_tensor(f);
    edge_encoder.for_each_tensor(f);
    for (auto& b : blocks) {
      b.edge_mlp.for_each_tensor(f);
      b.node_mlp.for_each_tensor(f);
    }
    decoder.for_each_tensor(f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    node_encoder.for_each_tensor(f);
    edge_encoder.for_each_tensor(f);
    for (const auto& b : blocks) {
      b.edge_mlp.for_each_tensor(f);
      b.node_mlp.for_each_tensor(f);
    }
    decoder.for_each_tensor(f);
  }

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

/// Random initialization (deterministic in `seed`), identity statistics.
ProcessorParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Same shapes as `params`, all weights zero.
ProcessorParams zeros_like(const ProcessorParams& params);

Eigen::MatrixXd node_features(const MeshGraph& graph, const FrameState& frame, const FeatureLayout& layout);
Eigen::MatrixXd edge_features(const MeshGraph& graph, const std::vector<DirectedEdge>& edges);
/// Per-node next-minus-current state, output layout.
Eigen::MatrixXd state_difference(const FrameState& current, const FrameState& next, const FeatureLayout& layout);

/// Node and edge latents. Row k of edge_latents belongs to edges[k].
struct LatentState {
  Eigen::MatrixXd node_latents;
  std::vector<DirectedEdge> edges;
  Eigen::MatrixXd edge_latents;

  std::optional<std::size_t> edge_row(DirectedEdge e) const;
};

/// Encodes nodes and the base mesh edges.
LatentState encode(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame);

/// One edge-then-node update over `active` directed edges (each must
/// already have a latent). `weights` scales each active edge in the
/// aggregation; empty means all ones. Nodes without active edges aggregate 0.
LatentState message_passing_block(const BlockParams& block, bool residual, const LatentState& latents,
                                  const std::vector<DirectedEdge>& active, std::span<const double> weights = {});

/// Every directed edge the processor will ever see for one schedule:
/// base edges active from block 1, then each rewired pair in both
/// directions with its activation block and aggregation weight.
struct EdgePlan {
  std::vector<DirectedEdge> edges;
  std::vector<int> activation;
  std::vector<double> weight;
  std::size_t base_count = 0;
};

EdgePlan plan_edges(const MeshGraph& graph, const RewireSchedule& schedule);

/// Decoder output in state units per step.
struct NodeOutput {
  Eigen::MatrixXd values;  // node_count x output_dim
};

NodeOutput forward(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame,
                   const RewireSchedule& schedule);

/// v_next = v + dv (and likewise for modeled scalars).
FrameState euler_update(const FrameState& frame, const NodeOutput& out);

/// As above, then non-fluid nodes take their values from `boundary`.
FrameState euler_update(const MeshGraph& graph, const FrameState& frame, const NodeOutput& out,
                        const FrameState& boundary);

struct LossGrad {
  double loss = 0.0;
  ProcessorParams grad;
};

/// MSE over fluid nodes between the normalized output and the normalized
/// state difference, with reverse-mode gradients of every parameter.
LossGrad loss_and_grad(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame_t,
                       const FrameState& frame_next, const RewireSchedule& schedule);

/// Loss only (no tape); used by finite-difference checks.
double loss_only(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame_t,
                 const FrameState& frame_next, const RewireSchedule& schedule);

}  // namespace rewirenet
