#include "rewirenet/processor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "rewirenet/errors.hpp"

namespace rewirenet {

FeatureLayout layout_of(const FrameState& frame) {
  return FeatureLayout{frame.pressure.has_value(), frame.density.has_value()};
}

FeatureStats FeatureStats::identity(int dim) {
  return FeatureStats{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

FeatureStats FeatureStats::fit(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("cannot fit statistics on zero samples");
  FeatureStats s;
  s.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / static_cast<double>(samples.rows())).sqrt().transpose();
  s.std = s.std.cwiseMax(1e-8);
  return s;
}

Eigen::MatrixXd FeatureStats::normalize(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("dimension mismatch in feature normalization");
  return ((x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
}

Eigen::MatrixXd FeatureStats::denormalize(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("dimension mismatch in feature normalization");
  return ((x.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose());
}

void ModelConfig::validate() const {
  if (layers < 1) throw ValidationError("layers must be >= 1, got " + std::to_string(layers));
  if (hidden_dim < 1) throw ValidationError("hidden_dim must be >= 1, got " + std::to_string(hidden_dim));
  if (mlp_hidden_layers < 0) throw ValidationError("mlp_hidden_layers must be >= 0");
}

void ProcessorParams::validate() const {
  if (layers < 1) throw std::invalid_argument("processor needs at least one block");
  if (static_cast<int>(blocks.size()) != layers) throw std::invalid_argument("block count differs from layers");
  node_encoder.validate();
  edge_encoder.validate();
  decoder.validate();
  const int h = hidden_dim;
  if (node_encoder.input_dim() != features.node_input_dim() || node_encoder.output_dim() != h) {
    throw std::invalid_argument("node encoder dimensions do not match the feature layout / hidden width");
  }
  if (edge_encoder.input_dim() != FeatureLayout::edge_input_dim() || edge_encoder.output_dim() != h) {
    throw std::invalid_argument("edge encoder dimensions do not match the feature layout / hidden width");
  }
  if (decoder.input_dim() != h || decoder.output_dim() != features.output_dim()) {
    throw std::invalid_argument("decoder dimensions do not match the hidden width / output layout");
  }
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    blocks[l].edge_mlp.validate();
    blocks[l].node_mlp.validate();
    if (blocks[l].edge_mlp.input_dim() != 3 * h || blocks[l].edge_mlp.output_dim() != h ||
        blocks[l].node_mlp.input_dim() != 2 * h || blocks[l].node_mlp.output_dim() != h) {
      throw std::invalid_argument("block " + std::to_string(l + 1) + " dimensions do not match hidden width");
    }
  }
  if (node_stats.mean.size() != features.node_input_dim() || edge_stats.mean.size() != FeatureLayout::edge_input_dim() ||
      target_stats.mean.size() != features.output_dim()) {
    throw std::invalid_argument("normalization statistics do not match the feature layout");
  }
}

std::size_t ProcessorParams::parameter_count() const {
  std::size_t count = 0;
  for_each_tensor([&](std::span<const double> t) { count += t.size(); });
  return count;
}

std::vector<double> ProcessorParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_tensor([&](std::span<const double> t) { flat.insert(flat.end(), t.begin(), t.end()); });
  return flat;
}

void ProcessorParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("flat parameter vector has the wrong length");
  std::size_t offset = 0;
  for_each_tensor([&](std::span<double> t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
    offset += t.size();
  });
}

namespace {

std::vector<int> mlp_dims(int in, int hidden, int out, int hidden_layers) {
  std::vector<int> dims{in};
  for (int k = 0; k < hidden_layers; ++k) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

}  // namespace

namespace {
constexpr double kDecoderInitScale = 0.1;
}  // namespace

ProcessorParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const int h = config.hidden_dim;
  const int depth = config.mlp_hidden_layers;
  ProcessorParams p;
  p.hidden_dim = h;
  p.layers = config.layers;
  p.residual = config.residual;
  p.features = config.features;
  p.node_encoder = make_mlp(mlp_dims(config.features.node_input_dim(), h, h, depth), config.activation, rng);
  p.edge_encoder = make_mlp(mlp_dims(FeatureLayout::edge_input_dim(), h, h, depth), config.activation, rng);
  for (int l = 0; l < config.layers; ++l) {
    BlockParams b;
    b.edge_mlp = make_mlp(mlp_dims(3 * h, h, h, depth), config.activation, rng);
    b.node_mlp = make_mlp(mlp_dims(2 * h, h, h, depth), config.activation, rng);
    // Summed messages through residual blocks grow the latents layer by layer;
    // shrinking each branch's output layer keeps the untrained model near identity.
    const double branch = 1.0 / std::sqrt(2.0 * config.layers);
    b.edge_mlp.layers.back().weight *= branch;
    b.node_mlp.layers.back().weight *= branch;
    p.blocks.push_back(std::move(b));
  }
  p.decoder = make_mlp(mlp_dims(h, h, config.features.output_dim(), depth), config.activation, rng);
  p.decoder.layers.back().weight *= kDecoderInitScale;
  p.node_stats = FeatureStats::identity(config.features.node_input_dim());
  p.edge_stats = FeatureStats::identity(FeatureLayout::edge_input_dim());
  p.target_stats = FeatureStats::identity(config.features.output_dim());
  return p;
}

ProcessorParams zeros_like(const ProcessorParams& params) {
  ProcessorParams z = params;
  z.for_each_tensor([](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
  return z;
}

Eigen::MatrixXd node_features(const MeshGraph& graph, const FrameState& frame, const FeatureLayout& layout) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  if (frame.velocity.size() != graph.node_count()) {
    throw InvariantError("dimension mismatch: frame has " + std::to_string(frame.velocity.size()) +
                         " velocities for " + std::to_string(n) + " nodes");
  }
  if (layout.pressure && !frame.pressure) throw InvariantError("dimension mismatch: layout needs pressure");
  if (layout.density && !frame.density) throw InvariantError("dimension mismatch: layout needs density");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, layout.node_input_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    int c = 0;
    x(i, c++) = frame.velocity[i][0];
    x(i, c++) = frame.velocity[i][1];
    if (layout.pressure) x(i, c++) = (*frame.pressure)[i];
    if (layout.density) x(i, c++) = (*frame.density)[i];
    x(i, c + static_cast<int>(graph.type(static_cast<NodeId>(i)))) = 1.0;
  }
  return x;
}

Eigen::MatrixXd edge_features(const MeshGraph& graph, const std::vector<DirectedEdge>& edges) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(edges.size()), FeatureLayout::edge_input_dim());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& pi = graph.position(edges[k].receiver);
    const auto& pj = graph.position(edges[k].sender);
    const double dx = pi[0] - pj[0];
    const double dy = pi[1] - pj[1];
    x(static_cast<Eigen::Index>(k), 0) = dx;
    x(static_cast<Eigen::Index>(k), 1) = dy;
    x(static_cast<Eigen::Index>(k), 2) = std::hypot(dx, dy);
  }
  return x;
}

Eigen::MatrixXd state_difference(const FrameState& current, const FrameState& next, const FeatureLayout& layout) {
  const auto n = current.velocity.size();
  if (next.velocity.size() != n) throw InvariantError("consecutive frames differ in node count");
  Eigen::MatrixXd d(static_cast<Eigen::Index>(n), layout.output_dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    int c = 0;
    d(r, c++) = next.velocity[i][0] - current.velocity[i][0];
    d(r, c++) = next.velocity[i][1] - current.velocity[i][1];
    if (layout.pressure) d(r, c++) = next.pressure.value().at(i) - current.pressure.value().at(i);
    if (layout.density) d(r, c++) = next.density.value().at(i) - current.density.value().at(i);
  }
  return d;
}

std::optional<std::size_t> LatentState::edge_row(DirectedEdge e) const {
  auto it = std::find(edges.begin(), edges.end(), e);
  if (it == edges.end()) return std::nullopt;
  return static_cast<std::size_t>(it - edges.begin());
}

EdgePlan plan_edges(const MeshGraph& graph, const RewireSchedule& schedule) {
  EdgePlan plan;
  plan.edges = graph.directed_edges();
  plan.base_count = plan.edges.size();
  plan.activation.assign(plan.base_count, 1);
  plan.weight.assign(plan.base_count, 1.0);

  // A pair and its mirror (both endpoints bottlenecks) share one edge; earliest activation wins.
  std::map<std::pair<NodeId, NodeId>, std::pair<int, double>> rewired;
  for (const auto& p : schedule.pairs) {
    if (!graph.valid_node(p.source) || !graph.valid_node(p.partner) || p.source == p.partner) {
      throw std::invalid_argument("schedule pair references an invalid node");
    }
    if (graph.has_edge(p.source, p.partner)) continue;
    const auto key = std::minmax(p.source, p.partner);
    const auto value = std::make_pair(p.activation_layer, schedule.edge_weight(p));
    auto [it, inserted] = rewired.emplace(key, value);
    if (!inserted && value.first < it->second.first) it->second = value;
  }
  for (const auto& [key, value] : rewired) {
    for (auto e : {DirectedEdge{key.first, key.second}, DirectedEdge{key.second, key.first}}) {
      plan.edges.push_back(e);
      plan.activation.push_back(value.first);
      plan.weight.push_back(value.second);
    }
  }
  return plan;
}

namespace {

struct BlockTape {
  std::vector<std::size_t> active;
  MlpCache edge_cache;
  MlpCache node_cache;
};

struct Tape {
  EdgePlan plan;
  MlpCache node_encoder;
  MlpCache edge_encoder;
  std::vector<BlockTape> blocks;
  MlpCache decoder;
};

// Core edge-then-node update on row indices.
void block_step(const BlockParams& block, bool residual, const Eigen::MatrixXd& h, const Eigen::MatrixXd& e,
                const std::vector<DirectedEdge>& edges, const std::vector<std::size_t>& active,
                const std::vector<double>& weight, Eigen::MatrixXd& h_out, Eigen::MatrixXd& e_out, BlockTape* tape) {
  const Eigen::Index hd = h.cols();
  const auto na = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd cat(na, 3 * hd);
  for (Eigen::Index r = 0; r < na; ++r) {
    const auto a = active[static_cast<std::size_t>(r)];
    cat.row(r).segment(0, hd) = e.row(static_cast<Eigen::Index>(a));
    cat.row(r).segment(hd, hd) = h.row(edges[a].receiver);
    cat.row(r).segment(2 * hd, hd) = h.row(edges[a].sender);
  }
  const Eigen::MatrixXd msg = mlp_forward_batch(block.edge_mlp, cat, tape ? &tape->edge_cache : nullptr);

  e_out = e;
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(h.rows(), hd);
  for (Eigen::Index r = 0; r < na; ++r) {
    const auto a = static_cast<Eigen::Index>(active[static_cast<std::size_t>(r)]);
    if (residual) {
      e_out.row(a) += msg.row(r);
    } else {
      e_out.row(a) = msg.row(r);
    }
    agg.row(edges[static_cast<std::size_t>(a)].receiver) += weight[static_cast<std::size_t>(r)] * e_out.row(a);
  }

  Eigen::MatrixXd node_cat(h.rows(), 2 * hd);
  node_cat << h, agg;
  Eigen::MatrixXd upd = mlp_forward_batch(block.node_mlp, node_cat, tape ? &tape->node_cache : nullptr);
  h_out = residual ? Eigen::MatrixXd(h + upd) : upd;
}

std::vector<std::size_t> active_rows(const EdgePlan& plan, int layer) {
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < plan.edges.size(); ++k) {
    if (plan.activation[k] <= layer) rows.push_back(k);
  }
  return rows;
}

void check_schedule(const ProcessorParams& params, const RewireSchedule& schedule) {
  if (schedule.layers != params.layers) {
    throw std::invalid_argument("schedule depth " + std::to_string(schedule.layers) + " differs from processor depth " +
                                std::to_string(params.layers));
  }
}

// Runs the full pipeline and returns the normalized decoder output.
Eigen::MatrixXd run(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame,
                    const RewireSchedule& schedule, Tape* tape) {
  check_schedule(params, schedule);
  Tape local;
  Tape& t = tape ? *tape : local;
  t.plan = plan_edges(graph, schedule);

  const Eigen::MatrixXd x_nodes = params.node_stats.normalize(node_features(graph, frame, params.features));
  const Eigen::MatrixXd x_edges = params.edge_stats.normalize(edge_features(graph, t.plan.edges));

  Eigen::MatrixXd h = mlp_forward_batch(params.node_encoder, x_nodes, tape ? &t.node_encoder : nullptr);
  // Rewired edges are encoded up front; they stay untouched until their activation block.
  Eigen::MatrixXd e = mlp_forward_batch(params.edge_encoder, x_edges, tape ? &t.edge_encoder : nullptr);
  if (tape) t.blocks.assign(static_cast<std::size_t>(params.layers), {});

  for (int l = 1; l <= params.layers; ++l) {
    const auto active = active_rows(t.plan, l);
    std::vector<double> w(active.size());
    for (std::size_t r = 0; r < active.size(); ++r) w[r] = t.plan.weight[active[r]];
    Eigen::MatrixXd h_next, e_next;
    BlockTape* bt = tape ? &t.blocks[static_cast<std::size_t>(l - 1)] : nullptr;
    block_step(params.blocks[static_cast<std::size_t>(l - 1)], params.residual, h, e, t.plan.edges, active, w, h_next,
               e_next, bt);
    if (bt) bt->active = active;
    h = std::move(h_next);
    e = std::move(e_next);
  }
  return mlp_forward_batch(params.decoder, h, tape ? &t.decoder : nullptr);
}

void check_finite_output(const Eigen::MatrixXd& out) {
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      if (!std::isfinite(out(i, c))) {
        throw DivergenceError("non-finite output at node " + std::to_string(i) + ", feature " + std::to_string(c));
      }
    }
  }
}

}  // namespace

LatentState encode(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame) {
  LatentState s;
  s.node_latents = mlp_forward_batch(params.node_encoder, params.node_stats.normalize(node_features(graph, frame, params.features)));
  s.edges = graph.directed_edges();
  s.edge_latents = mlp_forward_batch(params.edge_encoder, params.edge_stats.normalize(edge_features(graph, s.edges)));
  return s;
}

LatentState message_passing_block(const BlockParams& block, bool residual, const LatentState& latents,
                                  const std::vector<DirectedEdge>& active, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != active.size()) {
    throw std::invalid_argument("aggregation weights do not match the active edge list");
  }
  std::vector<std::size_t> rows;
  rows.reserve(active.size());
  for (const auto& e : active) {
    auto row = latents.edge_row(e);
    if (!row) {
      throw std::invalid_argument("missing latent for active edge (" + std::to_string(e.receiver) + "," +
                                  std::to_string(e.sender) + ")");
    }
    rows.push_back(*row);
  }
  std::vector<double> w(active.size(), 1.0);
  if (!weights.empty()) w.assign(weights.begin(), weights.end());
  LatentState out;
  out.edges = latents.edges;
  block_step(block, residual, latents.node_latents, latents.edge_latents, latents.edges, rows, w, out.node_latents,
             out.edge_latents, nullptr);
  return out;
}

NodeOutput forward(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame,
                   const RewireSchedule& schedule) {
  const Eigen::MatrixXd out = run(params, graph, frame, schedule, nullptr);
  return NodeOutput{params.target_stats.denormalize(out)};
}

FrameState euler_update(const FrameState& frame, const NodeOutput& out) {
  const auto layout = layout_of(frame);
  const auto n = frame.velocity.size();
  if (static_cast<std::size_t>(out.values.rows()) != n || out.values.cols() != layout.output_dim()) {
    throw std::invalid_argument("shape mismatch: output is " + std::to_string(out.values.rows()) + "x" +
                                std::to_string(out.values.cols()) + ", frame needs " + std::to_string(n) + "x" +
                                std::to_string(layout.output_dim()));
  }
  FrameState next = frame;
  next.time_index = frame.time_index + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    int c = 0;
    next.velocity[i][0] += out.values(r, c++);
    next.velocity[i][1] += out.values(r, c++);
    if (layout.pressure) (*next.pressure)[i] += out.values(r, c++);
    if (layout.density) (*next.density)[i] += out.values(r, c++);
  }
  return next;
}

FrameState euler_update(const MeshGraph& graph, const FrameState& frame, const NodeOutput& out,
                        const FrameState& boundary) {
  FrameState next = euler_update(frame, out);
  if (boundary.velocity.size() != next.velocity.size()) throw std::invalid_argument("shape mismatch: boundary frame");
  for (std::size_t i = 0; i < next.velocity.size(); ++i) {
    if (graph.type(static_cast<NodeId>(i)) == NodeType::fluid) continue;
    next.velocity[i] = boundary.velocity[i];
    if (next.pressure && boundary.pressure) (*next.pressure)[i] = (*boundary.pressure)[i];
    if (next.density && boundary.density) (*next.density)[i] = (*boundary.density)[i];
  }
  return next;
}

namespace {

struct LossTerms {
  double loss = 0.0;
  Eigen::MatrixXd grad_out;  // d loss / d normalized output
};

LossTerms masked_mse(const ProcessorParams& params, const MeshGraph& graph, const Eigen::MatrixXd& out,
                     const FrameState& frame_t, const FrameState& frame_next) {
  check_finite_output(out);
  const Eigen::MatrixXd target =
      params.target_stats.normalize(state_difference(frame_t, frame_next, params.features));
  std::size_t fluid = 0;
  for (std::size_t i = 0; i < graph.node_count(); ++i) fluid += graph.type(static_cast<NodeId>(i)) == NodeType::fluid;
  if (fluid == 0) throw std::invalid_argument("loss needs at least one fluid node");
  const double count = static_cast<double>(fluid) * static_cast<double>(out.cols());
  LossTerms terms;
  terms.grad_out = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (graph.type(static_cast<NodeId>(i)) != NodeType::fluid) continue;
    const Eigen::RowVectorXd diff = out.row(i) - target.row(i);
    terms.loss += diff.squaredNorm();
    terms.grad_out.row(i) = 2.0 * diff / count;
  }
  terms.loss /= count;
  if (!std::isfinite(terms.loss)) throw DivergenceError("non-finite loss");
  return terms;
}

}  // namespace

double loss_only(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame_t,
                 const FrameState& frame_next, const RewireSchedule& schedule) {
  const Eigen::MatrixXd out = run(params, graph, frame_t, schedule, nullptr);
  return masked_mse(params, graph, out, frame_t, frame_next).loss;
}

LossGrad loss_and_grad(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame_t,
                       const FrameState& frame_next, const RewireSchedule& schedule) {
  Tape tape;
  const Eigen::MatrixXd out = run(params, graph, frame_t, schedule, &tape);
  auto terms = masked_mse(params, graph, out, frame_t, frame_next);

  LossGrad result;
  result.loss = terms.loss;
  result.grad = zeros_like(params);
  auto& g = result.grad;

  Eigen::MatrixXd dh = mlp_backward_batch(params.decoder, tape.decoder, terms.grad_out, g.decoder);
  Eigen::MatrixXd de = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tape.plan.edges.size()), params.hidden_dim);
  const Eigen::Index hd = params.hidden_dim;
  const auto& edges = tape.plan.edges;

  for (int l = params.layers; l >= 1; --l) {
    const auto& block = params.blocks[static_cast<std::size_t>(l - 1)];
    auto& gblock = g.blocks[static_cast<std::size_t>(l - 1)];
    const auto& bt = tape.blocks[static_cast<std::size_t>(l - 1)];

    // Node update: h' = [h +] f_V([h, agg]).
    const Eigen::MatrixXd dcat = mlp_backward_batch(block.node_mlp, bt.node_cache, dh, gblock.node_mlp);
    Eigen::MatrixXd dh_prev = params.residual ? Eigen::MatrixXd(dh + dcat.leftCols(hd)) : Eigen::MatrixXd(dcat.leftCols(hd));
    const Eigen::MatrixXd dagg = dcat.rightCols(hd);

    // Aggregation: agg_i = sum_a w_a e'_a over active edges into i.
    const auto na = static_cast<Eigen::Index>(bt.active.size());
    Eigen::MatrixXd dmsg(na, hd);
    for (Eigen::Index r = 0; r < na; ++r) {
      const auto a = bt.active[static_cast<std::size_t>(r)];
      de.row(static_cast<Eigen::Index>(a)) += tape.plan.weight[a] * dagg.row(edges[a].receiver);
      dmsg.row(r) = de.row(static_cast<Eigen::Index>(a));
    }
    // Edge update: e'_a = [e_a +] f_E([e_a, h_recv, h_send]); inactive edges pass through.
    if (!params.residual) {
      for (auto a : bt.active) de.row(static_cast<Eigen::Index>(a)).setZero();
    }
    const Eigen::MatrixXd dedge_cat = mlp_backward_batch(block.edge_mlp, bt.edge_cache, dmsg, gblock.edge_mlp);
    for (Eigen::Index r = 0; r < na; ++r) {
      const auto a = bt.active[static_cast<std::size_t>(r)];
      de.row(static_cast<Eigen::Index>(a)) += dedge_cat.row(r).segment(0, hd);
      dh_prev.row(edges[a].receiver) += dedge_cat.row(r).segment(hd, hd);
      dh_prev.row(edges[a].sender) += dedge_cat.row(r).segment(2 * hd, hd);
    }
    dh = std::move(dh_prev);
  }

  mlp_backward_batch(params.edge_encoder, tape.edge_encoder, de, g.edge_encoder);
  mlp_backward_batch(params.node_encoder, tape.node_encoder, dh, g.node_encoder);
  return result;
}

}  // namespace rewirenet
