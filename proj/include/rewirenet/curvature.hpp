#pragma once

#include <map>
#include <utility>
#include <vector>

#include "rewirenet/meshgraph.hpp"

namespace rewirenet {

/// Probability mass on distinct nodes; masses positive and summing to 1.
struct WalkDistribution {
  std::vector<std::pair<NodeId, double>> support;
};

/// Edge curvature keyed by the canonical (min, max) node pair.
using EdgeCurvatureMap = std::map<std::pair<NodeId, NodeId>, double>;

struct CurvatureReport {
  EdgeCurvatureMap edge_kappa;
  std::vector<double> node_gamma;
  std::vector<NodeId> bottleneck_set;
  double percentile_a = 0.0;
};

/// Non-lazy one-step random walk from i: 1/deg(i) on each neighbor.
/// Throws std::domain_error for an isolated node.
WalkDistribution walk_distribution(const MeshGraph& graph, NodeId i);

/// Exact W1 between two distributions under hop-distance ground cost.
/// Throws std::domain_error if two support nodes are disconnected.
double wasserstein1(const MeshGraph& graph, const WalkDistribution& p, const WalkDistribution& q);

/// Ollivier-Ricci curvature 1 - W1(P_i, P_j) of the edge (i, j).
double edge_curvature(const MeshGraph& graph, NodeId i, NodeId j);

/// Mean curvature of the edges incident to i.
double node_curvature(const MeshGraph& graph, NodeId i, const EdgeCurvatureMap& kappa);

/// Percentile with linear interpolation between order statistics,
/// index (a/100)(n-1) on the ascending sort.
double percentile_linear(std::vector<double> values, double a);

/// Nodes with gamma <= Percentile_a(gamma), ascending by id. Ties at the
/// threshold are all included.
std::vector<NodeId> bottleneck_nodes(const std::vector<double>& gamma, double a);

/// Curvature of every undirected edge, aligned with graph.undirected_edges().
/// OpenMP-parallel over edges; output order is independent of thread count.
std::vector<double> edge_curvatures(const MeshGraph& graph);

/// Single-threaded reference for edge_curvatures.
std::vector<double> edge_curvatures_serial(const MeshGraph& graph);

/// Full pipeline: edge curvatures, node means, bottleneck set at percentile a.
/// Isolated nodes get gamma = 0.
CurvatureReport curvature_report(const MeshGraph& graph, double a);

}  // namespace rewirenet
