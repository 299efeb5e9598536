#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rewirenet/meshgraph.hpp"

namespace rewirenet {

enum class ScalarMapKind { affine, tanh };

/// f_E(e, h_i, h_j) = phi(edge*e + receiver*h_i + sender*h_j + bias).
struct ScalarEdgeMap {
  double edge = 0.0;
  double receiver = 0.0;
  double sender = 1.0;
  double bias = 0.0;
};

/// f_V(h, z) = phi(self*h + aggregate*z + bias).
struct ScalarNodeMap {
  double self = 0.0;
  double aggregate = 1.0;
  double bias = 0.0;
};

/// Width-1 message passing with the normalized-adjacency aggregation
/// z_i = sum_j Â_ij e_ij over j in N(i) and i itself; phi is the identity
/// (affine) or tanh. Node states start at the inputs, edge states at
/// `initial_edge`.
struct AnalysisProcessor {
  ScalarMapKind kind = ScalarMapKind::affine;
  ScalarEdgeMap edge_map;
  ScalarNodeMap node_map;
  int depth = 1;
  double initial_edge = 0.0;

  /// Upper bound on |d f_V / d z|; exact for affine maps, sup |tanh'| = 1 otherwise.
  double alpha_e() const;
  /// Upper bound on |d f_E / d h_j|.
  double beta_h() const;
};

/// Node and directed-edge states after `ap.depth` rounds.
struct AnalysisState {
  std::vector<double> nodes;
  std::vector<double> edges;  // aligned with graph.directed_edges()
};

AnalysisState analysis_forward(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x);

/// BFS ball of radius r around i.
std::set<NodeId> receptive_field(const MeshGraph& graph, NodeId i, int r);

/// d h_i / d x_s by central differences (step 1e-6).
double jacobian_node(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                     NodeId s);
/// d h_i / d x_s by forward-mode sensitivity propagation (exact up to rounding).
double jacobian_node_exact(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                           NodeId s);

/// d e_ij / d x_s by central differences; (i, j) must be an edge and depth >= 1.
double jacobian_edge(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                     NodeId j, NodeId s);
double jacobian_edge_exact(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                           NodeId j, NodeId s);

struct LemmaBounds {
  double node = 0.0;  // (alpha beta)^r (Â^r)_is
  double edge = 0.0;  // alpha^(r-1) beta^r (Â^(r-1))_js, 0 when r = 0
};

LemmaBounds lemma_bounds(const AnalysisProcessor& ap, const MeshGraph& graph, NodeId i, NodeId j, NodeId s, int r);

/// Same, from precomputed powers: a_hat_powers[k] = Â^k for k = 0..r.
LemmaBounds lemma_bounds(const AnalysisProcessor& ap, const std::vector<DenseMatrix>& a_hat_powers, NodeId i, NodeId j,
                         NodeId s, int r);

enum class JacobianKind { node, edge };

struct LemmaRow {
  int graph_id = 0;
  JacobianKind kind = JacobianKind::node;
  ScalarMapKind map = ScalarMapKind::affine;
  NodeId i = 0;
  NodeId j = -1;  // -1 for node rows
  NodeId s = 0;
  int r = 0;
  int hop = -1;  // d(i,s) for node rows, d(j,s) for edge rows; -1 when unreachable
  double jacobian_abs = 0.0;
  double bound = 0.0;
  bool zero_expected = false;
  bool pass = false;
};

struct DecaySummary {
  ScalarMapKind map = ScalarMapKind::affine;
  int r = 0;
  std::size_t rows = 0;
  double mean_bound = 0.0;
  double mean_ratio = 0.0;  // mean |J| / bound over rows with bound > 0
};

struct LemmaReport {
  std::vector<LemmaRow> rows;
  std::vector<DecaySummary> decay;
  bool all_pass = true;
  bool tightness_witnessed = false;  // an affine row with |J| == bound > 0 within 1e-9
  double max_affine_fd_error = 0.0;  // |fd - exact| / max(|exact|, 1) over affine rows
};

struct LemmaSweepConfig {
  int graphs = 8;
  int min_nodes = 4;
  int max_nodes = 12;
  int max_radius = 4;
  double extra_edge_probability = 0.15;
  std::uint64_t seed = 7;
};

inline constexpr double kZeroTolerance = 1e-8;
inline constexpr double kAffineBoundTolerance = 1e-9;
inline constexpr double kFiniteDifferenceBoundTolerance = 1e-5;

/// Sweeps random connected graphs, affine and tanh processors, every radius
/// 1..max_radius and every (i, s) with d(i, s) >= r (the Lemma's hypothesis;
/// unreachable pairs included), plus every directed edge (i, j) for those s.
LemmaReport verify_lemma(const LemmaSweepConfig& config);

/// Random spanning tree plus independent extra edges; node positions on a circle.
MeshGraph random_connected_graph(int n, double extra_edge_probability, std::mt19937_64& rng);

std::string lemma_report_csv(const LemmaReport& report);

}  // namespace rewirenet
