#include "rewirenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "rewirenet/curvature.hpp"
#include "rewirenet/errors.hpp"

namespace rewirenet {

void TrainConfig::validate() const {
  model.validate();
  rewirenet::validate(rewire);
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ValidationError("step size must be positive, got " + std::to_string(step_size));
  }
  if (epochs < 1) throw ValidationError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch < 1) throw ValidationError("batch must be >= 1, got " + std::to_string(batch));
}

namespace {

std::vector<NodeId> bottlenecks_for(const MeshGraph& graph, const RewireParams& rewire) {
  if (rewire.variant == RewireVariant::none) return {};
  return curvature_report(graph, rewire.alpha_percent).bottleneck_set;
}

void check_finite_frame(const FrameState& f, int step) {
  auto bad = [](double v) { return !std::isfinite(v); };
  for (const auto& v : f.velocity) {
    if (bad(v[0]) || bad(v[1])) throw DivergenceError("rollout step " + std::to_string(step) + ": non-finite state");
  }
  for (const auto* field : {&f.pressure, &f.density}) {
    if (*field && std::any_of((*field)->begin(), (*field)->end(), bad)) {
      throw DivergenceError("rollout step " + std::to_string(step) + ": non-finite state");
    }
  }
}

}  // namespace

std::vector<Sample> make_samples(const std::vector<Trajectory>& trajectories, const RewireParams& rewire) {
  std::vector<Sample> samples;
  for (const auto& traj : trajectories) {
    const auto bottlenecks = bottlenecks_for(traj.graph, rewire);
    for (std::size_t t = 0; t + 1 < traj.frames.size(); ++t) {
      Sample s;
      s.graph = &traj.graph;
      s.current = &traj.frames[t];
      s.next = &traj.frames[t + 1];
      s.schedule = build_schedule(traj.graph, traj.frames[t], bottlenecks, rewire);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

void fit_normalization(ProcessorParams& params, const std::vector<Sample>& samples) {
  if (samples.empty()) throw ValidationError("no training samples");
  std::vector<Eigen::MatrixXd> nodes, targets;
  std::vector<const MeshGraph*> graphs;
  Eigen::Index node_rows = 0, target_rows = 0;
  for (const auto& s : samples) {
    nodes.push_back(node_features(*s.graph, *s.current, params.features));
    node_rows += nodes.back().rows();
    const Eigen::MatrixXd delta = state_difference(*s.current, *s.next, params.features);
    Eigen::MatrixXd fluid(delta.rows(), delta.cols());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
      if (s.graph->type(static_cast<NodeId>(i)) == NodeType::fluid) fluid.row(k++) = delta.row(i);
    }
    targets.push_back(fluid.topRows(k));
    target_rows += k;
    if (std::find(graphs.begin(), graphs.end(), s.graph) == graphs.end()) graphs.push_back(s.graph);
  }
  auto stack = [](const std::vector<Eigen::MatrixXd>& parts, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd all(rows, cols);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      all.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    return all;
  };
  params.node_stats = FeatureStats::fit(stack(nodes, node_rows, params.features.node_input_dim()));
  params.target_stats = FeatureStats::fit(stack(targets, target_rows, params.features.output_dim()));

  std::vector<Eigen::MatrixXd> edges;
  Eigen::Index edge_rows = 0;
  for (const auto* g : graphs) {
    edges.push_back(edge_features(*g, g->directed_edges()));
    edge_rows += edges.back().rows();
  }
  if (edge_rows > 0) params.edge_stats = FeatureStats::fit(stack(edges, edge_rows, FeatureLayout::edge_input_dim()));
}

namespace {

void accumulate(ProcessorParams& into, const ProcessorParams& from, double scale) {
  std::vector<std::span<const double>> src;
  from.for_each_tensor([&](std::span<const double> t) { src.push_back(t); });
  std::size_t k = 0;
  into.for_each_tensor([&](std::span<double> t) {
    const auto s = src[k++];
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += scale * s[i];
  });
}

LossGrad reduce(const ProcessorParams& params, std::vector<LossGrad>& parts) {
  LossGrad total;
  total.grad = zeros_like(params);
  const double scale = 1.0 / static_cast<double>(parts.size());
  for (const auto& p : parts) {
    total.loss += p.loss * scale;
    accumulate(total.grad, p.grad, scale);
  }
  return total;
}

}  // namespace

LossGrad batch_loss_and_grad_serial(const ProcessorParams& params, const std::vector<Sample>& samples,
                                    const std::vector<std::size_t>& indices) {
  std::vector<LossGrad> parts;
  parts.reserve(indices.size());
  for (auto idx : indices) {
    const auto& s = samples[idx];
    parts.push_back(loss_and_grad(params, *s.graph, *s.current, *s.next, s.schedule));
  }
  return reduce(params, parts);
}

LossGrad batch_loss_and_grad(const ProcessorParams& params, const std::vector<Sample>& samples,
                             const std::vector<std::size_t>& indices) {
  const auto count = static_cast<std::ptrdiff_t>(indices.size());
  std::vector<LossGrad> parts(indices.size());
  std::vector<std::string> errors(indices.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto& s = samples[indices[static_cast<std::size_t>(k)]];
    try {
      parts[static_cast<std::size_t>(k)] = loss_and_grad(params, *s.graph, *s.current, *s.next, s.schedule);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(k)] = e.what();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) throw DivergenceError("sample " + std::to_string(indices[k]) + ": " + errors[k]);
  }
  return reduce(params, parts);
}

TrainResult train(const TrainConfig& config, const std::vector<Trajectory>& trajectories) {
  config.validate();
  if (trajectories.empty()) throw ValidationError("training needs at least one trajectory");
  for (const auto& t : trajectories) {
    if (t.frames.size() < 2) throw ValidationError("training trajectories need at least two frames");
    if (layout_of(t.frames.front()) != config.model.features) {
      throw ValidationError("trajectory fields do not match the model feature layout");
    }
  }
  RewireParams rewire = config.rewire;
  rewire.layers = config.model.layers;

  TrainResult result;
  result.params = init_params(config.model, config.seed);
  const auto samples = make_samples(trajectories, rewire);
  fit_normalization(result.params, samples);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + batch)));
      LossGrad lg;
      try {
        lg = batch_loss_and_grad(result.params, samples, idx);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      epoch_loss += lg.loss * static_cast<double>(idx.size());
      accumulate(result.params, lg.grad, -config.step_size);
      bool finite = true;
      result.params.for_each_tensor([&](std::span<const double> t) {
        finite = finite && std::all_of(t.begin(), t.end(), [](double v) { return std::isfinite(v); });
      });
      if (!finite) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": non-finite weights (step size " +
                              std::to_string(config.step_size) + ")");
      }
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  return result;
}

namespace {

const FrameState* boundary_frame(const Trajectory* boundary, std::int64_t time_index) {
  if (!boundary) return nullptr;
  const auto k = time_index - boundary->frames.front().time_index;
  if (k < 0 || k >= static_cast<std::int64_t>(boundary->frames.size())) {
    throw std::out_of_range("boundary trajectory has no frame for t=" + std::to_string(time_index));
  }
  return &boundary->frames[static_cast<std::size_t>(k)];
}

FrameState step_once(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame,
                     const std::vector<NodeId>& bottlenecks, const RewireParams& rewire, const Trajectory* boundary) {
  const auto schedule = build_schedule(graph, frame, bottlenecks, rewire);
  const auto out = forward(params, graph, frame, schedule);
  const auto* b = boundary_frame(boundary, frame.time_index + 1);
  return b ? euler_update(graph, frame, out, *b) : euler_update(frame, out);
}

}  // namespace

Trajectory rollout(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame0, int steps,
                   const RewireParams& rewire_in, const Trajectory* boundary) {
  if (steps < 1) throw ValidationError("rollout needs steps >= 1");
  validate_frame(graph, frame0);
  RewireParams rewire = rewire_in;
  rewire.layers = params.layers;
  const auto bottlenecks = bottlenecks_for(graph, rewire);
  Trajectory out;
  out.graph = graph;
  out.frames.reserve(static_cast<std::size_t>(steps) + 1);
  out.frames.push_back(frame0);
  for (int k = 1; k <= steps; ++k) {
    out.frames.push_back(step_once(params, graph, out.frames.back(), bottlenecks, rewire, boundary));
    check_finite_frame(out.frames.back(), k);
  }
  return out;
}

Trajectory teacher_forced(const ProcessorParams& params, const Trajectory& truth, const RewireParams& rewire_in) {
  RewireParams rewire = rewire_in;
  rewire.layers = params.layers;
  const auto bottlenecks = bottlenecks_for(truth.graph, rewire);
  Trajectory out;
  out.graph = truth.graph;
  out.frames.push_back(truth.frames.front());
  for (std::size_t k = 1; k < truth.frames.size(); ++k) {
    out.frames.push_back(step_once(params, truth.graph, truth.frames[k - 1], bottlenecks, rewire, &truth));
    check_finite_frame(out.frames.back(), static_cast<int>(k));
  }
  return out;
}

}  // namespace rewirenet
