#include "rewirenet/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rewirenet {

namespace {

struct Cell {
  std::size_t row;
  std::size_t col;
};

}  // namespace

TransportPlan solve_transportation(std::span<const double> supply, std::span<const double> demand,
                                   std::span<const double> cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0) throw std::invalid_argument("transportation problem with an empty side");
  if (cost.size() != m * n) throw std::invalid_argument("cost matrix size does not match supply x demand");
  for (double a : supply) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("supply must be finite and non-negative");
  }
  for (double b : demand) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("demand must be finite and non-negative");
  }
  for (double c : cost) {
    if (!std::isfinite(c)) throw std::invalid_argument("cost must be finite");
  }
  const double total_a = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_b = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(total_a - total_b) > 1e-9 * std::max(1.0, total_a)) {
    throw std::invalid_argument("unbalanced transportation problem");
  }

  TransportPlan plan;
  plan.flow.assign(m * n, 0.0);
  std::vector<char> basic(m * n, 0);
  std::vector<Cell> basis;
  basis.reserve(m + n - 1);

  // Northwest corner: a staircase of exactly m + n - 1 cells, degenerate zeros included.
  {
    std::vector<double> ra(supply.begin(), supply.end());
    std::vector<double> rb(demand.begin(), demand.end());
    std::size_t i = 0, j = 0;
    while (true) {
      const double x = std::min(ra[i], rb[j]);
      plan.flow[i * n + j] = x;
      basic[i * n + j] = 1;
      basis.push_back({i, j});
      ra[i] -= x;
      rb[j] -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (ra[i] <= rb[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double max_cost = std::transform_reduce(cost.begin(), cost.end(), 0.0,
                                                [](double a, double b) { return std::max(a, b); },
                                                [](double c) { return std::abs(c); });
  const double tol = 1e-12 * (1.0 + max_cost);
  const std::size_t nodes = m + n;  // rows 0..m-1, columns m..m+n-1
  constexpr int kMaxPivots = 100000;

  std::vector<double> potential(nodes);
  std::vector<char> assigned(nodes);
  std::vector<std::vector<std::size_t>> incident(nodes);  // basis slot indices
  std::vector<std::ptrdiff_t> parent_slot(nodes);
  std::vector<std::size_t> parent_node(nodes);

  auto rebuild_incidence = [&] {
    for (auto& v : incident) v.clear();
    for (std::size_t k = 0; k < basis.size(); ++k) {
      incident[basis[k].row].push_back(k);
      incident[m + basis[k].col].push_back(k);
    }
  };

  while (true) {
    rebuild_incidence();

    // u_row + v_col = cost on every basic cell, u_0 = 0.
    std::fill(assigned.begin(), assigned.end(), 0);
    std::deque<std::size_t> queue{0};
    potential[0] = 0.0;
    assigned[0] = 1;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto k : incident[u]) {
        const auto& c = basis[k];
        const std::size_t other = (u < m) ? m + c.col : c.row;
        if (assigned[other]) continue;
        potential[other] = cost[c.row * n + c.col] - potential[u];
        assigned[other] = 1;
        queue.push_back(other);
      }
    }

    // Bland: first non-basic cell with negative reduced cost.
    std::ptrdiff_t entering = -1;
    for (std::size_t idx = 0; idx < m * n && entering < 0; ++idx) {
      if (basic[idx]) continue;
      const std::size_t r = idx / n, c = idx % n;
      if (cost[idx] - potential[r] - potential[m + c] < -tol) entering = static_cast<std::ptrdiff_t>(idx);
    }
    if (entering < 0) break;
    if (++plan.pivots > kMaxPivots) throw std::runtime_error("transportation simplex exceeded pivot limit");

    const std::size_t er = static_cast<std::size_t>(entering) / n;
    const std::size_t ec = static_cast<std::size_t>(entering) % n;

    // Tree path from the entering column back to the entering row.
    std::fill(assigned.begin(), assigned.end(), 0);
    std::fill(parent_slot.begin(), parent_slot.end(), -1);
    queue.assign(1, m + ec);
    assigned[m + ec] = 1;
    while (!queue.empty() && !assigned[er]) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto k : incident[u]) {
        const auto& c = basis[k];
        const std::size_t other = (u < m) ? m + c.col : c.row;
        if (assigned[other]) continue;
        assigned[other] = 1;
        parent_slot[other] = static_cast<std::ptrdiff_t>(k);
        parent_node[other] = u;
        queue.push_back(other);
      }
    }
    if (!assigned[er]) throw std::logic_error("transportation basis is not a spanning tree");

    // Walk row er -> column ec; signs alternate starting with '-' next to the row.
    std::vector<std::size_t> path;
    for (std::size_t v = er; v != m + ec; v = parent_node[v]) path.push_back(static_cast<std::size_t>(parent_slot[v]));

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave_pos = 0;
    std::size_t leave_cell = m * n;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const auto& c = basis[path[p]];
      const std::size_t idx = c.row * n + c.col;
      const double x = plan.flow[idx];
      if (x < theta || (x == theta && idx < leave_cell)) {
        theta = x;
        leave_pos = p;
        leave_cell = idx;
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      const auto& c = basis[path[p]];
      const std::size_t idx = c.row * n + c.col;
      plan.flow[idx] += (p % 2 == 0) ? -theta : theta;
    }
    plan.flow[leave_cell] = 0.0;
    plan.flow[static_cast<std::size_t>(entering)] = theta;
    basic[leave_cell] = 0;
    basic[static_cast<std::size_t>(entering)] = 1;
    basis[path[leave_pos]] = {er, ec};
  }

  for (std::size_t idx = 0; idx < m * n; ++idx) {
    if (plan.flow[idx] < 0.0) plan.flow[idx] = 0.0;
    plan.cost += plan.flow[idx] * cost[idx];
  }
  return plan;
}

}  // namespace rewirenet
