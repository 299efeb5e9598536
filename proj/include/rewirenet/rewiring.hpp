#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "rewirenet/curvature.hpp"
#include "rewirenet/meshgraph.hpp"

namespace rewirenet {

enum class RewireVariant {
  adaptive,
  static_all_at_first_layer,
  no_distance,
  no_velocity,
  weighted_edges,
  none,
};

inline constexpr RewireVariant kAllVariants[] = {
    RewireVariant::adaptive,    RewireVariant::static_all_at_first_layer, RewireVariant::no_distance,
    RewireVariant::no_velocity, RewireVariant::weighted_edges,            RewireVariant::none,
};

std::string_view to_string(RewireVariant v);
RewireVariant variant_from_string(std::string_view s);

struct RewirePair {
  NodeId source = 0;
  NodeId partner = 0;
  int hop_distance = 1;
  double velocity_gap = 0.0;
  double delay = 0.0;
  int activation_layer = 1;

  friend bool operator==(const RewirePair&, const RewirePair&) = default;
};

struct RewireSchedule {
  std::vector<RewirePair> pairs;  // sorted by source, at most one per source
  int layers = 1;
  RewireVariant variant = RewireVariant::adaptive;

  /// Aggregation weight of the rewired edge for `pair`: 1/hop for the
  /// weighted_edges variant, 1 otherwise.
  double edge_weight(const RewirePair& pair) const;
};

struct RewireParams {
  double alpha_percent = 3.0;
  double beta = 1.0;
  int layers = 6;
  RewireVariant variant = RewireVariant::adaptive;
};

/// argmax_{j != i} |v_i - v_j|, smallest id on ties; nullopt when every gap is zero.
std::optional<NodeId> find_partner(const FrameState& frame, NodeId i);

/// Same as find_partner but throws std::domain_error("no informative partner").
NodeId optimal_partner(const MeshGraph& graph, const FrameState& frame, NodeId i);

/// min(beta * hop / gap, layers).
double delay_score(int hop_distance, double velocity_gap, double beta, int layers);

/// ceil(delay) clamped to [1, layers]: the block l with l-1 < delay <= l.
int activation_layer(double delay, int layers);

/// Schedule from a precomputed bottleneck set (curvature depends on the graph only).
RewireSchedule build_schedule(const MeshGraph& graph, const FrameState& frame,
                              const std::vector<NodeId>& bottlenecks, const RewireParams& params);

/// Full pipeline: curvature -> bottlenecks(a) -> partners -> delays.
RewireSchedule build_schedule(const MeshGraph& graph, const FrameState& frame, const RewireParams& params);

/// Neighbors of i active in block l (1-based): base edges plus rewired
/// partners with activation_layer <= l, in both directions. Ascending.
std::vector<NodeId> neighbor_set(const RewireSchedule& schedule, const MeshGraph& graph, NodeId i, int l);

void validate(const RewireParams& params);

}  // namespace rewirenet
