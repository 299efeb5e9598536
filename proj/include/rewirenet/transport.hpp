#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rewirenet {

/// Optimal plan of a balanced transportation problem.
struct TransportPlan {
  double cost = 0.0;
  /// Row-major supply.size() x demand.size() flows.
  std::vector<double> flow;
  int pivots = 0;
};

/// Exact transportation simplex (northwest-corner start, u-v potentials,
/// stepping-stone pivots with Bland's smallest-index entering rule).
///
/// `cost` is row-major supply.size() x demand.size(). Supplies and demands
/// must be non-negative with equal totals (to 1e-9 relative).
TransportPlan solve_transportation(std::span<const double> supply, std::span<const double> demand,
                                   std::span<const double> cost);

}  // namespace rewirenet
