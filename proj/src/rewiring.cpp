#include "rewirenet/rewiring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rewirenet/errors.hpp"

namespace rewirenet {

std::string_view to_string(RewireVariant v) {
  switch (v) {
    case RewireVariant::adaptive: return "adaptive";
    case RewireVariant::static_all_at_first_layer: return "static_all_at_first_layer";
    case RewireVariant::no_distance: return "no_distance";
    case RewireVariant::no_velocity: return "no_velocity";
    case RewireVariant::weighted_edges: return "weighted_edges";
    case RewireVariant::none: return "none";
  }
  return "adaptive";
}

RewireVariant variant_from_string(std::string_view s) {
  for (auto v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown rewiring variant '" + std::string(s) + "'");
}

double RewireSchedule::edge_weight(const RewirePair& pair) const {
  return variant == RewireVariant::weighted_edges ? 1.0 / static_cast<double>(pair.hop_distance) : 1.0;
}

void validate(const RewireParams& params) {
  if (!(params.alpha_percent > 0.0 && params.alpha_percent <= 100.0)) {
    throw ValidationError("alpha must lie in (0, 100], got " + std::to_string(params.alpha_percent));
  }
  if (!(params.beta > 0.0) || !std::isfinite(params.beta)) {
    throw ValidationError("beta must be positive, got " + std::to_string(params.beta));
  }
  if (params.layers < 1) throw ValidationError("layers must be >= 1, got " + std::to_string(params.layers));
}

namespace {

double gap(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

std::optional<NodeId> find_partner(const FrameState& frame, NodeId i) {
  const auto n = frame.velocity.size();
  if (n < 2) throw std::invalid_argument("partner search needs at least two nodes");
  if (i < 0 || static_cast<std::size_t>(i) >= n) throw std::out_of_range("invalid node " + std::to_string(i));
  double best = 0.0;
  std::optional<NodeId> arg;
  for (std::size_t j = 0; j < n; ++j) {
    if (static_cast<NodeId>(j) == i) continue;
    const double g = gap(frame.velocity[i], frame.velocity[j]);
    if (g > best) {
      best = g;
      arg = static_cast<NodeId>(j);
    }
  }
  return arg;
}

NodeId optimal_partner(const MeshGraph& graph, const FrameState& frame, NodeId i) {
  if (frame.velocity.size() != graph.node_count()) throw InvariantError("frame does not match graph");
  auto p = find_partner(frame, i);
  if (!p) throw std::domain_error("no informative partner for node " + std::to_string(i));
  return *p;
}

double delay_score(int hop_distance, double velocity_gap, double beta, int layers) {
  if (!(velocity_gap > 0.0)) throw std::domain_error("velocity gap must be positive");
  if (hop_distance < 1 || !(beta > 0.0) || layers < 1) throw std::invalid_argument("delay score arguments out of range");
  return std::min(beta * static_cast<double>(hop_distance) / velocity_gap, static_cast<double>(layers));
}

int activation_layer(double delay, int layers) {
  const double c = std::ceil(delay);
  if (c <= 1.0) return 1;
  if (c >= static_cast<double>(layers)) return layers;
  return static_cast<int>(c);
}

RewireSchedule build_schedule(const MeshGraph& graph, const FrameState& frame,
                              const std::vector<NodeId>& bottlenecks, const RewireParams& params) {
  validate(params);
  validate_frame(graph, frame);
  RewireSchedule schedule;
  schedule.layers = params.layers;
  schedule.variant = params.variant;
  if (params.variant == RewireVariant::none || graph.node_count() < 2) return schedule;

  for (NodeId i : bottlenecks) {
    const auto partner = find_partner(frame, i);
    if (!partner || graph.has_edge(i, *partner)) continue;
    const int hop = hop_distances(graph, i)[*partner];
    if (hop < 1) continue;  // different component
    const double g = gap(frame.velocity[i], frame.velocity[*partner]);

    RewirePair pair{i, *partner, hop, g, 0.0, 1};
    switch (params.variant) {
      case RewireVariant::no_distance:
        pair.delay = delay_score(1, g, params.beta, params.layers);
        pair.activation_layer = activation_layer(pair.delay, params.layers);
        break;
      case RewireVariant::no_velocity:
        pair.delay = std::min(params.beta * hop, static_cast<double>(params.layers));
        pair.activation_layer = activation_layer(pair.delay, params.layers);
        break;
      case RewireVariant::static_all_at_first_layer:
      case RewireVariant::weighted_edges:
        pair.delay = delay_score(hop, g, params.beta, params.layers);
        pair.activation_layer = 1;
        break;
      default:
        pair.delay = delay_score(hop, g, params.beta, params.layers);
        pair.activation_layer = activation_layer(pair.delay, params.layers);
        break;
    }
    schedule.pairs.push_back(pair);
  }
  std::sort(schedule.pairs.begin(), schedule.pairs.end(),
            [](const RewirePair& a, const RewirePair& b) { return a.source < b.source; });
  return schedule;
}

RewireSchedule build_schedule(const MeshGraph& graph, const FrameState& frame, const RewireParams& params) {
  validate(params);
  if (params.variant == RewireVariant::none) return build_schedule(graph, frame, std::vector<NodeId>{}, params);
  const auto report = curvature_report(graph, params.alpha_percent);
  return build_schedule(graph, frame, report.bottleneck_set, params);
}

std::vector<NodeId> neighbor_set(const RewireSchedule& schedule, const MeshGraph& graph, NodeId i, int l) {
  if (l < 1 || l > schedule.layers) {
    throw std::out_of_range("layer index " + std::to_string(l) + " outside [1, " + std::to_string(schedule.layers) + "]");
  }
  if (!graph.valid_node(i)) throw std::out_of_range("invalid node " + std::to_string(i));
  auto nb = graph.neighbors(i);
  std::vector<NodeId> out(nb.begin(), nb.end());
  for (const auto& p : schedule.pairs) {
    if (p.activation_layer > l) continue;
    if (p.source == i) out.push_back(p.partner);
    if (p.partner == i) out.push_back(p.source);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace rewirenet
