#include "rewirenet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rewirenet/csv.hpp"

namespace rewirenet {

double AnalysisProcessor::alpha_e() const { return std::abs(node_map.aggregate); }
double AnalysisProcessor::beta_h() const { return std::abs(edge_map.sender); }

namespace {

struct Activated {
  double value;
  double slope;
};

Activated apply(ScalarMapKind kind, double pre) {
  if (kind == ScalarMapKind::affine) return {pre, 1.0};
  const double t = std::tanh(pre);
  return {t, 1.0 - t * t};
}

// Values and tangents d/dx_s (tangent seed only when s >= 0).
struct DualState {
  std::vector<double> h, dh;
  std::vector<double> e, de;          // graph.directed_edges()
  std::vector<double> self, dself;    // self-loop edge states
};

DualState run_dual(const AnalysisProcessor& ap, const MeshGraph& graph, const DenseMatrix& a_hat,
                   const std::vector<double>& x, NodeId seed) {
  const auto n = graph.node_count();
  if (x.size() != n) throw std::invalid_argument("input length does not match node count");
  for (double v : x) {
    if (!std::isfinite(v)) throw std::domain_error("non-finite input");
  }
  if (ap.depth < 0) throw std::invalid_argument("negative depth");
  const auto& edges = graph.directed_edges();
  const auto& fe = ap.edge_map;
  const auto& fv = ap.node_map;

  DualState st;
  st.h = x;
  st.dh.assign(n, 0.0);
  if (seed >= 0) st.dh[seed] = 1.0;
  st.e.assign(edges.size(), ap.initial_edge);
  st.de.assign(edges.size(), 0.0);
  st.self.assign(n, ap.initial_edge);
  st.dself.assign(n, 0.0);

  std::vector<double> z(n), dz(n);
  for (int layer = 0; layer < ap.depth; ++layer) {
    std::fill(z.begin(), z.end(), 0.0);
    std::fill(dz.begin(), dz.end(), 0.0);
    // Edge update reads layer-l node states only, so it can be done in place.
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto i = edges[k].receiver, j = edges[k].sender;
      const auto act = apply(ap.kind, fe.edge * st.e[k] + fe.receiver * st.h[i] + fe.sender * st.h[j] + fe.bias);
      st.de[k] = act.slope * (fe.edge * st.de[k] + fe.receiver * st.dh[i] + fe.sender * st.dh[j]);
      st.e[k] = act.value;
      z[i] += a_hat(i, j) * st.e[k];
      dz[i] += a_hat(i, j) * st.de[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto act = apply(ap.kind, fe.edge * st.self[i] + (fe.receiver + fe.sender) * st.h[i] + fe.bias);
      st.dself[i] = act.slope * (fe.edge * st.dself[i] + (fe.receiver + fe.sender) * st.dh[i]);
      st.self[i] = act.value;
      z[i] += a_hat(i, i) * st.self[i];
      dz[i] += a_hat(i, i) * st.dself[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto act = apply(ap.kind, fv.self * st.h[i] + fv.aggregate * z[i] + fv.bias);
      st.dh[i] = act.slope * (fv.self * st.dh[i] + fv.aggregate * dz[i]);
      st.h[i] = act.value;
      if (!std::isfinite(st.h[i])) throw std::domain_error("non-finite intermediate at node " + std::to_string(i));
    }
  }
  return st;
}

std::size_t edge_index(const MeshGraph& graph, NodeId i, NodeId j) {
  const auto& edges = graph.directed_edges();
  auto it = std::lower_bound(edges.begin(), edges.end(), DirectedEdge{i, j}, [](const DirectedEdge& a, const DirectedEdge& b) {
    return a.receiver != b.receiver ? a.receiver < b.receiver : a.sender < b.sender;
  });
  if (it == edges.end() || !(*it == DirectedEdge{i, j})) {
    throw std::invalid_argument("(" + std::to_string(i) + "," + std::to_string(j) + ") is not an edge");
  }
  return static_cast<std::size_t>(it - edges.begin());
}

constexpr double kStep = 1e-6;

template <class Read>
double central_difference(const AnalysisProcessor& ap, const MeshGraph& graph, const DenseMatrix& a_hat,
                          const std::vector<double>& x, NodeId s, Read read) {
  auto xp = x, xm = x;
  xp[s] += kStep;
  xm[s] -= kStep;
  const auto plus = run_dual(ap, graph, a_hat, xp, -1);
  const auto minus = run_dual(ap, graph, a_hat, xm, -1);
  return (read(plus) - read(minus)) / (2.0 * kStep);
}

void check_nodes(const MeshGraph& graph, std::initializer_list<NodeId> ids) {
  for (auto id : ids) {
    if (!graph.valid_node(id)) throw std::out_of_range("invalid node " + std::to_string(id));
  }
}

}  // namespace

AnalysisState analysis_forward(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x) {
  const auto st = run_dual(ap, graph, normalized_adjacency(graph), x, -1);
  return AnalysisState{st.h, st.e};
}

std::set<NodeId> receptive_field(const MeshGraph& graph, NodeId i, int r) {
  if (!graph.valid_node(i)) throw std::out_of_range("invalid node " + std::to_string(i));
  if (r < 0) throw std::invalid_argument("negative radius");
  std::set<NodeId> ball;
  for (const auto& [node, d] : shortest_paths(graph, i, r)) ball.insert(node);
  return ball;
}

double jacobian_node(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                     NodeId s) {
  check_nodes(graph, {i, s});
  return central_difference(ap, graph, normalized_adjacency(graph), x, s, [i](const DualState& st) { return st.h[i]; });
}

double jacobian_node_exact(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                           NodeId s) {
  check_nodes(graph, {i, s});
  return run_dual(ap, graph, normalized_adjacency(graph), x, s).dh[i];
}

double jacobian_edge(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                     NodeId j, NodeId s) {
  check_nodes(graph, {i, j, s});
  if (ap.depth < 1) throw std::invalid_argument("edge Jacobian needs depth >= 1");
  const auto k = edge_index(graph, i, j);
  return central_difference(ap, graph, normalized_adjacency(graph), x, s, [k](const DualState& st) { return st.e[k]; });
}

double jacobian_edge_exact(const AnalysisProcessor& ap, const MeshGraph& graph, const std::vector<double>& x, NodeId i,
                           NodeId j, NodeId s) {
  check_nodes(graph, {i, j, s});
  if (ap.depth < 1) throw std::invalid_argument("edge Jacobian needs depth >= 1");
  const auto k = edge_index(graph, i, j);
  return run_dual(ap, graph, normalized_adjacency(graph), x, s).de[k];
}

LemmaBounds lemma_bounds(const AnalysisProcessor& ap, const std::vector<DenseMatrix>& powers, NodeId i, NodeId j,
                         NodeId s, int r) {
  if (r < 0 || static_cast<std::size_t>(r) >= powers.size()) throw std::invalid_argument("radius outside precomputed powers");
  const double a = ap.alpha_e(), b = ap.beta_h();
  LemmaBounds out;
  out.node = std::pow(a * b, r) * powers[static_cast<std::size_t>(r)](i, s);
  if (r >= 1 && j >= 0) out.edge = std::pow(a, r - 1) * std::pow(b, r) * powers[static_cast<std::size_t>(r - 1)](j, s);
  return out;
}

LemmaBounds lemma_bounds(const AnalysisProcessor& ap, const MeshGraph& graph, NodeId i, NodeId j, NodeId s, int r) {
  check_nodes(graph, {i, s});
  if (j >= 0) check_nodes(graph, {j});
  if (r < 0) throw std::invalid_argument("negative radius");
  const auto a_hat = normalized_adjacency(graph);
  std::vector<DenseMatrix> powers{DenseMatrix::identity(graph.node_count())};
  for (int k = 1; k <= r; ++k) powers.push_back(powers.back() * a_hat);
  return lemma_bounds(ap, powers, i, j, s, r);
}

MeshGraph random_connected_graph(int n, double extra_edge_probability, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("graph needs at least one node");
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    edges.emplace_back(pick(rng), v);
  }
  std::bernoulli_distribution extra(extra_edge_probability);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const bool present = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
        return std::minmax(e.first, e.second) == std::minmax(NodeId{a}, NodeId{b});
      });
      if (!present && extra(rng)) edges.emplace_back(a, b);
    }
  }
  std::vector<Vec2> pos(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    const double angle = 2.0 * std::numbers::pi * v / n;
    pos[static_cast<std::size_t>(v)] = {std::cos(angle), std::sin(angle)};
  }
  return MeshGraph(std::move(pos), std::vector<NodeType>(static_cast<std::size_t>(n), NodeType::fluid), std::move(edges));
}

namespace {

AnalysisProcessor random_processor(ScalarMapKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  std::uniform_real_distribution<double> magnitude(0.3, 1.5);
  std::bernoulli_distribution negative(0.5);
  auto nonzero = [&] { return (negative(rng) ? -1.0 : 1.0) * magnitude(rng); };
  AnalysisProcessor ap;
  ap.kind = kind;
  ap.edge_map = {coef(rng), coef(rng), nonzero(), 0.2 * coef(rng)};
  ap.node_map = {coef(rng), nonzero(), 0.2 * coef(rng)};
  ap.initial_edge = 0.5 * coef(rng);
  return ap;
}

}  // namespace

LemmaReport verify_lemma(const LemmaSweepConfig& config) {
  if (config.graphs < 1 || config.min_nodes < 1 || config.max_nodes < config.min_nodes || config.max_radius < 1) {
    throw std::invalid_argument("invalid Lemma sweep configuration");
  }
  std::mt19937_64 rng(config.seed);
  LemmaReport report;

  struct Acc {
    std::size_t rows = 0, ratio_rows = 0;
    double bound = 0.0, ratio = 0.0;
  };
  std::vector<Acc> acc(2 * static_cast<std::size_t>(config.max_radius + 1));

  for (int g = 0; g < config.graphs; ++g) {
    std::uniform_int_distribution<int> size(config.min_nodes, config.max_nodes);
    const auto graph = random_connected_graph(size(rng), config.extra_edge_probability, rng);
    const auto n = static_cast<NodeId>(graph.node_count());
    const auto a_hat = normalized_adjacency(graph);
    std::vector<DenseMatrix> powers{DenseMatrix::identity(graph.node_count())};
    for (int k = 1; k <= config.max_radius; ++k) powers.push_back(powers.back() * a_hat);
    std::vector<std::vector<int>> dist;
    for (NodeId v = 0; v < n; ++v) dist.push_back(hop_distances(graph, v));

    for (auto kind : {ScalarMapKind::affine, ScalarMapKind::tanh}) {
      auto ap = random_processor(kind, rng);
      std::uniform_real_distribution<double> input(-1.0, 1.0);
      std::vector<double> x(graph.node_count());
      for (auto& v : x) v = input(rng);
      const double tol = kind == ScalarMapKind::affine ? kAffineBoundTolerance : kFiniteDifferenceBoundTolerance;

      for (int r = 1; r <= config.max_radius; ++r) {
        ap.depth = r;
        auto record = [&](LemmaRow row, double fd, double exact) {
          if (kind == ScalarMapKind::affine) {
            report.max_affine_fd_error = std::max(report.max_affine_fd_error, std::abs(fd - exact) / std::max(std::abs(exact), 1.0));
          }
          row.jacobian_abs = std::abs(kind == ScalarMapKind::affine ? exact : fd);
          row.pass = (!row.zero_expected || row.jacobian_abs <= kZeroTolerance) && row.jacobian_abs <= row.bound + tol;
          report.all_pass = report.all_pass && row.pass;
          if (kind == ScalarMapKind::affine && row.bound > 0.0 && std::abs(row.jacobian_abs - row.bound) <= 1e-9) {
            report.tightness_witnessed = true;
          }
          if (row.kind == JacobianKind::node) {
            auto& a = acc[static_cast<std::size_t>(kind == ScalarMapKind::tanh) * (config.max_radius + 1) + r];
            ++a.rows;
            a.bound += row.bound;
            if (row.bound > 0.0) {
              ++a.ratio_rows;
              a.ratio += row.jacobian_abs / row.bound;
            }
          }
          report.rows.push_back(row);
        };

        for (NodeId s = 0; s < n; ++s) {
          // One exact sensitivity pass per source covers all rows for that s.
          const auto exact = run_dual(ap, graph, a_hat, x, s);
          auto xp = x, xm = x;
          xp[s] += kStep;
          xm[s] -= kStep;
          const auto plus = run_dual(ap, graph, a_hat, xp, -1);
          const auto minus = run_dual(ap, graph, a_hat, xm, -1);

          for (NodeId i = 0; i < n; ++i) {
            const int d_is = dist[i][s];
            if (d_is >= 0 && d_is < r) continue;
            LemmaRow row;
            row.graph_id = g;
            row.kind = JacobianKind::node;
            row.map = kind;
            row.i = i;
            row.s = s;
            row.r = r;
            row.hop = d_is;
            row.bound = lemma_bounds(ap, powers, i, -1, s, r).node;
            row.zero_expected = d_is < 0 || d_is > r;
            record(row, (plus.h[i] - minus.h[i]) / (2.0 * kStep), exact.dh[i]);

            const auto& edges = graph.directed_edges();
            for (std::size_t k = 0; k < edges.size(); ++k) {
              if (edges[k].receiver != i) continue;
              const NodeId j = edges[k].sender;
              LemmaRow erow = row;
              erow.kind = JacobianKind::edge;
              erow.j = j;
              erow.hop = dist[j][s];
              erow.bound = lemma_bounds(ap, powers, i, j, s, r).edge;
              erow.zero_expected = erow.hop < 0 || erow.hop > r - 1;
              record(erow, (plus.e[k] - minus.e[k]) / (2.0 * kStep), exact.de[k]);
            }
          }
        }
      }
    }
  }

  for (int m = 0; m < 2; ++m) {
    for (int r = 1; r <= config.max_radius; ++r) {
      const auto& a = acc[static_cast<std::size_t>(m) * (config.max_radius + 1) + r];
      DecaySummary d;
      d.map = m == 0 ? ScalarMapKind::affine : ScalarMapKind::tanh;
      d.r = r;
      d.rows = a.rows;
      d.mean_bound = a.rows ? a.bound / static_cast<double>(a.rows) : 0.0;
      d.mean_ratio = a.ratio_rows ? a.ratio / static_cast<double>(a.ratio_rows) : 0.0;
      report.decay.push_back(d);
    }
  }
  return report;
}

std::string lemma_report_csv(const LemmaReport& report) {
  std::string out;
  csv::row(out, "graph_id", "kind", "i", "j", "s", "r", "hop", "jac", "bound", "zero_expected", "pass");
  for (const auto& r : report.rows) {
    std::string kind = r.kind == JacobianKind::node ? "node_" : "edge_";
    kind += r.map == ScalarMapKind::affine ? "affine" : "tanh";
    csv::row(out, r.graph_id, kind, r.i, r.j, r.s, r.r, r.hop, r.jacobian_abs, r.bound, r.zero_expected, r.pass);
  }
  return out;
}

}  // namespace rewirenet
