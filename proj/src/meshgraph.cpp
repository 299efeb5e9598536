#include "rewirenet/meshgraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "rewirenet/errors.hpp"

namespace rewirenet {

std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::fluid: return "fluid";
    case NodeType::wall: return "wall";
    case NodeType::inflow: return "inflow";
    case NodeType::outflow: return "outflow";
  }
  return "fluid";
}

NodeType node_type_from_string(std::string_view s) {
  if (s == "fluid") return NodeType::fluid;
  if (s == "wall") return NodeType::wall;
  if (s == "inflow") return NodeType::inflow;
  if (s == "outflow") return NodeType::outflow;
  throw ParseError("unknown node type '" + std::string(s) + "'");
}

MeshGraph::MeshGraph(std::vector<Vec2> positions, std::vector<NodeType> types,
                     std::vector<std::pair<NodeId, NodeId>> edges)
    : positions_(std::move(positions)), types_(std::move(types)) {
  const auto n = positions_.size();
  if (types_.size() != n) {
    throw InvariantError("length mismatch: " + std::to_string(types_.size()) + " node types for " +
                         std::to_string(n) + " positions");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(positions_[i][0]) || !std::isfinite(positions_[i][1])) {
      throw InvariantError("non-finite position at node " + std::to_string(i));
    }
  }

  std::set<std::pair<NodeId, NodeId>> seen;
  edges_.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto [a, b] = edges[k];
    const auto where = "edge #" + std::to_string(k) + " [" + std::to_string(a) + "," + std::to_string(b) + "]";
    if (a == b) throw InvariantError("self-loop at " + where);
    if (!valid_node(a) || !valid_node(b)) throw InvariantError("index out of range at " + where);
    if (a > b) std::swap(a, b);
    if (!seen.emplace(a, b).second) throw InvariantError("duplicate edge at " + where);
    edges_.emplace_back(a, b);
  }
  std::sort(edges_.begin(), edges_.end());

  std::vector<std::size_t> deg(n, 0);
  for (auto [a, b] : edges_) {
    ++deg[a];
    ++deg[b];
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + deg[i];
  adjacency_.assign(offsets_[n], 0);
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (auto [a, b] : edges_) {
    adjacency_[fill[a]++] = b;
    adjacency_[fill[b]++] = a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(adjacency_.begin() + offsets_[i], adjacency_.begin() + offsets_[i + 1]);
  }

  directed_.reserve(2 * edges_.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (NodeId j : neighbors(static_cast<NodeId>(i))) directed_.push_back({static_cast<NodeId>(i), j});
  }
}

bool MeshGraph::has_edge(NodeId i, NodeId j) const {
  if (!valid_node(i) || !valid_node(j)) return false;
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

void validate_frame(const MeshGraph& graph, const FrameState& frame) {
  const auto n = graph.node_count();
  const auto t = "frame t=" + std::to_string(frame.time_index);
  if (frame.time_index < 0) throw InvariantError(t + ": negative time index");
  if (frame.velocity.size() != n) {
    throw InvariantError(t + ": length mismatch in velocity (" + std::to_string(frame.velocity.size()) +
                         " entries for " + std::to_string(n) + " nodes)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(frame.velocity[i][0]) || !std::isfinite(frame.velocity[i][1])) {
      throw InvariantError(t + ": non-finite velocity at node " + std::to_string(i));
    }
  }
  auto check_scalar = [&](const std::optional<std::vector<double>>& field, const char* name) {
    if (!field) return;
    if (field->size() != n) {
      throw InvariantError(t + ": length mismatch in " + name + " (" + std::to_string(field->size()) +
                           " entries for " + std::to_string(n) + " nodes)");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite((*field)[i])) {
        throw InvariantError(t + ": non-finite " + name + " at node " + std::to_string(i));
      }
    }
  };
  check_scalar(frame.pressure, "pressure");
  check_scalar(frame.density, "density");
}

void validate_trajectory(const Trajectory& traj) {
  if (traj.frames.empty()) throw InvariantError("trajectory has no frames");
  for (std::size_t k = 0; k < traj.frames.size(); ++k) {
    validate_frame(traj.graph, traj.frames[k]);
    if (k > 0 && traj.frames[k].time_index != traj.frames[k - 1].time_index + 1) {
      throw InvariantError("frame #" + std::to_string(k) + ": time_index must increase by 1");
    }
    if (k > 0 && (traj.frames[k].pressure.has_value() != traj.frames[0].pressure.has_value() ||
                  traj.frames[k].density.has_value() != traj.frames[0].density.has_value())) {
      throw InvariantError("frame #" + std::to_string(k) + ": optional fields differ from frame 0");
    }
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& rhs) const {
  if (cols_ != rhs.rows_) throw std::invalid_argument("dimension mismatch in matrix product");
  DenseMatrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
    }
  }
  return out;
}

std::vector<int> hop_distances(const MeshGraph& graph, NodeId source, int cutoff) {
  if (!graph.valid_node(source)) throw std::out_of_range("invalid source node " + std::to_string(source));
  if (cutoff < 0) throw std::invalid_argument("negative BFS cutoff");
  std::vector<int> dist(graph.node_count(), -1);
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    if (dist[u] == cutoff) continue;
    for (NodeId v : graph.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::map<NodeId, int> shortest_paths(const MeshGraph& graph, NodeId source, int cutoff) {
  const auto dist = hop_distances(graph, source, cutoff);
  std::map<NodeId, int> out;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] >= 0) out.emplace(static_cast<NodeId>(i), dist[i]);
  }
  return out;
}

DenseMatrix normalized_adjacency(const MeshGraph& graph) {
  const auto n = graph.node_count();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(graph.degree(static_cast<NodeId>(i)) + 1));
  }
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = inv_sqrt[i] * inv_sqrt[i];
    for (NodeId j : graph.neighbors(static_cast<NodeId>(i))) a(i, j) = inv_sqrt[i] * inv_sqrt[j];
  }
  return a;
}

double adjacency_power_entry(const DenseMatrix& a_hat, int r, NodeId i, NodeId s) {
  const auto n = a_hat.rows();
  if (a_hat.cols() != n) throw std::invalid_argument("dimension mismatch: matrix is not square");
  if (r < 0) throw std::invalid_argument("negative matrix power");
  if (i < 0 || s < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(s) >= n) {
    throw std::invalid_argument("dimension mismatch: index outside matrix");
  }
  // Row vector e_i propagated r times.
  std::vector<double> row(n, 0.0), next(n);
  row[i] = 1.0;
  for (int step = 0; step < r; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (row[k] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) next[j] += row[k] * a_hat(k, j);
    }
    row.swap(next);
  }
  return row[s];
}

DenseMatrix matrix_power(const DenseMatrix& a_hat, int r) {
  if (a_hat.rows() != a_hat.cols()) throw std::invalid_argument("dimension mismatch: matrix is not square");
  if (r < 0) throw std::invalid_argument("negative matrix power");
  auto out = DenseMatrix::identity(a_hat.rows());
  for (int step = 0; step < r; ++step) out = out * a_hat;
  return out;
}

}  // namespace rewirenet
