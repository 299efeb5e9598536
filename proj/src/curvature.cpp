#include "rewirenet/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rewirenet/transport.hpp"

namespace rewirenet {

WalkDistribution walk_distribution(const MeshGraph& graph, NodeId i) {
  if (!graph.valid_node(i)) throw std::out_of_range("invalid node " + std::to_string(i));
  const auto deg = graph.degree(i);
  if (deg == 0) throw std::domain_error("isolated node " + std::to_string(i) + ": curvature undefined");
  WalkDistribution p;
  p.support.reserve(deg);
  for (NodeId j : graph.neighbors(i)) p.support.emplace_back(j, 1.0 / static_cast<double>(deg));
  return p;
}

double wasserstein1(const MeshGraph& graph, const WalkDistribution& p, const WalkDistribution& q) {
  const auto m = p.support.size();
  const auto n = q.support.size();
  std::vector<double> supply(m), demand(n), cost(m * n);
  for (std::size_t a = 0; a < m; ++a) {
    supply[a] = p.support[a].second;
    const auto dist = hop_distances(graph, p.support[a].first);
    for (std::size_t b = 0; b < n; ++b) {
      const int d = dist[q.support[b].first];
      if (d < 0) {
        throw std::domain_error("infinite ground distance between nodes " + std::to_string(p.support[a].first) +
                                " and " + std::to_string(q.support[b].first));
      }
      cost[a * n + b] = d;
    }
  }
  for (std::size_t b = 0; b < n; ++b) demand[b] = q.support[b].second;
  return solve_transportation(supply, demand, cost).cost;
}

double edge_curvature(const MeshGraph& graph, NodeId i, NodeId j) {
  if (!graph.has_edge(i, j)) {
    throw std::invalid_argument("(" + std::to_string(i) + "," + std::to_string(j) + ") is not an edge");
  }
  // Canonical orientation so kappa(i, j) and kappa(j, i) share one computation.
  if (i > j) std::swap(i, j);
  return 1.0 - wasserstein1(graph, walk_distribution(graph, i), walk_distribution(graph, j));
}

double node_curvature(const MeshGraph& graph, NodeId i, const EdgeCurvatureMap& kappa) {
  const auto nb = graph.neighbors(i);
  if (nb.empty()) throw std::domain_error("isolated node " + std::to_string(i) + ": curvature undefined");
  double sum = 0.0;
  for (NodeId j : nb) {
    auto it = kappa.find({std::min(i, j), std::max(i, j)});
    if (it == kappa.end()) {
      throw std::invalid_argument("missing curvature for incident edge (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
    }
    sum += it->second;
  }
  return sum / static_cast<double>(nb.size());
}

double percentile_linear(std::vector<double> values, double a) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty array");
  if (!(a > 0.0 && a <= 100.0)) throw std::invalid_argument("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = (a / 100.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<NodeId> bottleneck_nodes(const std::vector<double>& gamma, double a) {
  if (gamma.empty()) throw std::invalid_argument("empty curvature array");
  for (double g : gamma) {
    if (!std::isfinite(g)) throw std::invalid_argument("non-finite node curvature");
  }
  const double threshold = percentile_linear(gamma, a);
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (gamma[i] <= threshold) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::vector<double> edge_curvatures_serial(const MeshGraph& graph) {
  const auto& edges = graph.undirected_edges();
  std::vector<double> kappa(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) kappa[k] = edge_curvature(graph, edges[k].first, edges[k].second);
  return kappa;
}

std::vector<double> edge_curvatures(const MeshGraph& graph) {
  const auto& edges = graph.undirected_edges();
  const auto count = static_cast<std::ptrdiff_t>(edges.size());
  std::vector<double> kappa(edges.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    kappa[k] = edge_curvature(graph, edges[k].first, edges[k].second);
  }
  return kappa;
}

CurvatureReport curvature_report(const MeshGraph& graph, double a) {
  CurvatureReport report;
  report.percentile_a = a;
  const auto kappa = edge_curvatures(graph);
  const auto& edges = graph.undirected_edges();
  for (std::size_t k = 0; k < edges.size(); ++k) report.edge_kappa.emplace(edges[k], kappa[k]);
  report.node_gamma.assign(graph.node_count(), 0.0);
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto id = static_cast<NodeId>(i);
    if (graph.degree(id) > 0) report.node_gamma[i] = node_curvature(graph, id, report.edge_kappa);
  }
  if (!report.node_gamma.empty()) report.bottleneck_set = bottleneck_nodes(report.node_gamma, a);
  return report;
}

}  // namespace rewirenet
