#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rewirenet {

using NodeId = std::int32_t;
using Vec2 = std::array<double, 2>;

enum class NodeType : std::uint8_t { fluid = 0, wall = 1, inflow = 2, outflow = 3 };
inline constexpr int kNodeTypeCount = 4;

std::string_view to_string(NodeType t);
NodeType node_type_from_string(std::string_view s);

/// Directed edge: `receiver` aggregates the message carried on (receiver, sender).
struct DirectedEdge {
  NodeId receiver;
  NodeId sender;
  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

/// Static mesh topology and geometry. Immutable after construction.
///
/// Undirected edges are kept canonical (i < j, sorted); the directed view
/// holds both orientations so each direction owns its own latent.
class MeshGraph {
 public:
  MeshGraph() = default;

  /// Validates and builds. `edges` may list a pair in either orientation but
  /// only once; self-loops, duplicates and out-of-range endpoints throw
  /// InvariantError.
  MeshGraph(std::vector<Vec2> positions, std::vector<NodeType> types,
            std::vector<std::pair<NodeId, NodeId>> edges);

  std::size_t node_count() const { return positions_.size(); }
  std::size_t undirected_edge_count() const { return edges_.size(); }

  const std::vector<std::pair<NodeId, NodeId>>& undirected_edges() const { return edges_; }
  const std::vector<DirectedEdge>& directed_edges() const { return directed_; }

  std::span<const NodeId> neighbors(NodeId i) const {
    return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
  }
  std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }
  bool has_edge(NodeId i, NodeId j) const;

  const Vec2& position(NodeId i) const { return positions_[i]; }
  const std::vector<Vec2>& positions() const { return positions_; }
  NodeType type(NodeId i) const { return types_[i]; }
  const std::vector<NodeType>& types() const { return types_; }

  bool valid_node(NodeId i) const { return i >= 0 && static_cast<std::size_t>(i) < node_count(); }

  friend bool operator==(const MeshGraph&, const MeshGraph&) = default;

 private:
  std::vector<Vec2> positions_;
  std::vector<NodeType> types_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<DirectedEdge> directed_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> adjacency_;
};

/// Per-timestep dynamic quantities.
struct FrameState {
  std::int64_t time_index = 0;
  std::vector<Vec2> velocity;
  std::optional<std::vector<double>> pressure;
  std::optional<std::vector<double>> density;

  friend bool operator==(const FrameState&, const FrameState&) = default;
};

/// Throws InvariantError if `frame` does not fit `graph` or holds non-finite values.
void validate_frame(const MeshGraph& graph, const FrameState& frame);

struct Trajectory {
  MeshGraph graph;
  std::vector<FrameState> frames;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

void validate_trajectory(const Trajectory& traj);

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  std::span<const double> entries() const { return entries_; }

  DenseMatrix operator*(const DenseMatrix& rhs) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

inline constexpr int kUnbounded = std::numeric_limits<int>::max();

/// Breadth-first hop distances from `source`; nodes beyond `cutoff` or
/// unreachable are absent.
std::map<NodeId, int> shortest_paths(const MeshGraph& graph, NodeId source, int cutoff = kUnbounded);

/// Dense variant of shortest_paths: -1 marks unreachable or beyond cutoff.
std::vector<int> hop_distances(const MeshGraph& graph, NodeId source, int cutoff = kUnbounded);

/// D̃^{-1/2} (A + I) D̃^{-1/2}.
DenseMatrix normalized_adjacency(const MeshGraph& graph);

/// Entry (i, s) of a_hat^r; r = 0 gives the identity entry.
double adjacency_power_entry(const DenseMatrix& a_hat, int r, NodeId i, NodeId s);

/// Full matrix power a_hat^r.
DenseMatrix matrix_power(const DenseMatrix& a_hat, int r);

}  // namespace rewirenet
