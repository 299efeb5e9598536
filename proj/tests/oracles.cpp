#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rewirenet/rewiring.hpp"

namespace oracle {

using rewirenet::NodeType;
using rewirenet::Vec2;

MeshGraph make_graph(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<Vec2> pos;
  for (int i = 0; i < n; ++i) pos.push_back({static_cast<double>(i), 0.5 * static_cast<double>(i % 3)});
  std::vector<std::pair<NodeId, NodeId>> e(edges.begin(), edges.end());
  return MeshGraph(std::move(pos), std::vector<NodeType>(static_cast<std::size_t>(n), NodeType::fluid), std::move(e));
}

MeshGraph path_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e);
}

MeshGraph cycle_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return make_graph(n, e);
}

MeshGraph complete_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  }
  return make_graph(n, e);
}

MeshGraph star_graph(int leaves) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return make_graph(leaves + 1, e);
}

std::vector<std::vector<int>> all_pairs_hops(const MeshGraph& g) {
  const int n = static_cast<int>(g.node_count());
  constexpr int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& [a, b] : g.undirected_edges()) d[a][b] = d[b][a] = 1;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  for (auto& row : d) {
    for (auto& v : row) {
      if (v >= inf) v = -1;
    }
  }
  return d;
}

namespace {

struct Enumerator {
  const std::vector<std::vector<int>>& dist;
  const IntegerMeasure& p;
  const IntegerMeasure& q;
  std::vector<long> row_left, col_left;
  long best = std::numeric_limits<long>::max();

  long cost(std::size_t a, std::size_t b) const {
    const int d = dist[p.mass[a].first][q.mass[b].first];
    if (d < 0) throw std::domain_error("oracle: disconnected support");
    return d;
  }

  void visit(std::size_t a, std::size_t b, long acc) {
    if (acc >= best) return;
    if (a == p.mass.size()) {
      best = acc;
      return;
    }
    const bool last_col = b + 1 == q.mass.size();
    const std::size_t na = last_col ? a + 1 : a, nb = last_col ? 0 : b + 1;
    const long hi = std::min(row_left[a], col_left[b]);
    const long lo = last_col ? row_left[a] : 0;
    if (lo > hi) return;
    for (long t = lo; t <= hi; ++t) {
      row_left[a] -= t;
      col_left[b] -= t;
      visit(na, nb, acc + t * cost(a, b));
      row_left[a] += t;
      col_left[b] += t;
    }
  }
};

}  // namespace

double brute_force_w1(const std::vector<std::vector<int>>& dist, const IntegerMeasure& p, const IntegerMeasure& q) {
  if (p.total != q.total || p.total <= 0) throw std::invalid_argument("oracle: unequal totals");
  Enumerator e{dist, p, q, {}, {}};
  for (const auto& [node, m] : p.mass) e.row_left.push_back(m);
  for (const auto& [node, m] : q.mass) e.col_left.push_back(m);
  e.visit(0, 0, 0);
  return static_cast<double>(e.best) / static_cast<double>(p.total);
}

double brute_force_curvature(const MeshGraph& g, NodeId i, NodeId j) {
  const auto di = static_cast<long>(g.degree(i)), dj = static_cast<long>(g.degree(j));
  const long scale = std::lcm(di, dj);
  IntegerMeasure p, q;
  for (auto v : g.neighbors(i)) p.mass.emplace_back(v, scale / di);
  for (auto v : g.neighbors(j)) q.mass.emplace_back(v, scale / dj);
  p.total = q.total = scale;
  return 1.0 - brute_force_w1(all_pairs_hops(g), p, q);
}

MeshGraph random_bounded_degree_graph(int n, int max_degree, double extra_edge_probability, std::mt19937_64& rng) {
  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<int, int>> edges;
  auto has = [&](int a, int b) {
    return std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
      return (e.first == a && e.second == b) || (e.first == b && e.second == a);
    });
  };
  for (int v = 1; v < n; ++v) {
    std::vector<int> open;
    for (int u = 0; u < v; ++u) {
      if (deg[u] < max_degree) open.push_back(u);
    }
    const int u = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    edges.emplace_back(u, v);
    ++deg[u];
    ++deg[v];
  }
  std::bernoulli_distribution extra(extra_edge_probability);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (deg[a] < max_degree && deg[b] < max_degree && !has(a, b) && extra(rng)) {
        edges.emplace_back(a, b);
        ++deg[a];
        ++deg[b];
      }
    }
  }
  return make_graph(n, edges);
}

int schedule_property_failures(int trials, std::uint64_t seed, std::string* first_failure) {
  using namespace rewirenet;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> vel(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int failures = 0;
  auto fail = [&](int trial, const std::string& what) {
    if (failures == 0 && first_failure) *first_failure = "trial " + std::to_string(trial) + ": " + what;
    ++failures;
  };

  for (int trial = 0; trial < trials; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 12);
    const auto g = random_bounded_degree_graph(n, 4, 0.2, rng);
    FrameState frame;
    for (int i = 0; i < n; ++i) frame.velocity.push_back({vel(rng), vel(rng)});
    RewireParams params;
    params.alpha_percent = 1.0 + 99.0 * unit(rng);
    params.beta = 0.1 + 3.0 * unit(rng);
    params.layers = 1 + static_cast<int>(rng() % 15);
    params.variant = kAllVariants[rng() % std::size(kAllVariants)];

    const auto s = build_schedule(g, frame, params);
    bool ok = true;
    std::string what;
    for (const auto& p : s.pairs) {
      if (p.activation_layer < 1 || p.activation_layer > params.layers) {
        ok = false;
        what = "activation layer out of range";
      }
      if (g.has_edge(p.source, p.partner) || p.source == p.partner) {
        ok = false;
        what = "pair duplicates a base edge";
      }
      const auto at_src = neighbor_set(s, g, p.source, p.activation_layer);
      const auto at_dst = neighbor_set(s, g, p.partner, p.activation_layer);
      if (std::find(at_src.begin(), at_src.end(), p.partner) == at_src.end() ||
          std::find(at_dst.begin(), at_dst.end(), p.source) == at_dst.end()) {
        ok = false;
        what = "rewiring not symmetric";
      }
    }
    for (NodeId i = 0; i < n && ok; ++i) {
      for (int l = 1; l < params.layers; ++l) {
        const auto a = neighbor_set(s, g, i, l), b = neighbor_set(s, g, i, l + 1);
        if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) {
          ok = false;
          what = "neighbour sets not nested at node " + std::to_string(i) + " layer " + std::to_string(l);
        }
      }
      for (NodeId j = 0; j < n && ok; ++j) {
        const auto nb = neighbor_set(s, g, i, params.layers);
        const bool listed = std::find(nb.begin(), nb.end(), j) != nb.end();
        const bool expected = g.has_edge(i, j) || std::any_of(s.pairs.begin(), s.pairs.end(), [&](const RewirePair& p) {
                                return (p.source == i && p.partner == j) || (p.source == j && p.partner == i);
                              });
        if (listed != expected) {
          ok = false;
          what = "final neighbour set differs from base edges plus pairs";
        }
      }
    }

    // Larger beta never activates a pair earlier; partners do not depend on beta.
    auto larger = params;
    larger.beta = params.beta * (1.0 + unit(rng));
    const auto s2 = build_schedule(g, frame, larger);
    if (s2.pairs.size() != s.pairs.size()) {
      ok = false;
      what = "beta changed the pair set";
    } else {
      for (std::size_t k = 0; k < s.pairs.size(); ++k) {
        if (s2.pairs[k].partner != s.pairs[k].partner || s2.pairs[k].delay < s.pairs[k].delay ||
            s2.pairs[k].activation_layer < s.pairs[k].activation_layer) {
          ok = false;
          what = "delay not monotone in beta";
        }
      }
    }

    // Delay never grows with the velocity gap.
    const int hop = 1 + static_cast<int>(rng() % 10);
    const double g1 = 0.01 + 3.0 * unit(rng), g2 = g1 * (1.0 + unit(rng));
    const double d1 = delay_score(hop, g1, params.beta, params.layers);
    const double d2 = delay_score(hop, g2, params.beta, params.layers);
    if (d2 > d1 || activation_layer(d2, params.layers) > activation_layer(d1, params.layers)) {
      ok = false;
      what = "delay not antitone in the velocity gap";
    }
    if (!ok) fail(trial, what);
  }
  return failures;
}

GradientCheck check_gradient(const rewirenet::ProcessorParams& params, const MeshGraph& graph,
                             const rewirenet::FrameState& current, const rewirenet::FrameState& next,
                             const rewirenet::RewireSchedule& schedule, double step, double floor) {
  const auto analytic = rewirenet::loss_and_grad(params, graph, current, next, schedule).grad.flatten();
  auto flat = params.flatten();
  auto probe = params;
  GradientCheck out;
  out.parameters = flat.size();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    const double keep = flat[k];
    flat[k] = keep + step;
    probe.assign(flat);
    const double up = rewirenet::loss_only(probe, graph, current, next, schedule);
    flat[k] = keep - step;
    probe.assign(flat);
    const double down = rewirenet::loss_only(probe, graph, current, next, schedule);
    flat[k] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[k] - fd) / std::max({std::abs(analytic[k]), std::abs(fd), floor});
    out.max_relative_error = std::max(out.max_relative_error, err);
  }
  return out;
}

GradientInstance random_gradient_instance(int n, rewirenet::Activation activation, std::uint64_t seed) {
  using namespace rewirenet;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto base = random_bounded_degree_graph(n, 3, 0.3, rng);
  std::vector<Vec2> pos;
  std::vector<NodeType> types;
  for (int i = 0; i < n; ++i) {
    pos.push_back({u(rng) * 3.0, u(rng) * 3.0});
    types.push_back(i == 0 ? NodeType::wall : i == 1 ? NodeType::inflow : NodeType::fluid);
  }
  MeshGraph graph(pos, types, base.undirected_edges());

  GradientInstance inst{graph, {}, {}, {}, {}};
  for (int i = 0; i < n; ++i) {
    inst.current.velocity.push_back({u(rng), u(rng)});
    inst.next.velocity.push_back({u(rng), u(rng)});
  }
  inst.current.pressure = std::vector<double>(static_cast<std::size_t>(n));
  inst.next.pressure = std::vector<double>(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    (*inst.current.pressure)[static_cast<std::size_t>(i)] = u(rng);
    (*inst.next.pressure)[static_cast<std::size_t>(i)] = u(rng);
  }
  inst.next.time_index = 1;

  ModelConfig config;
  config.layers = 3;
  config.hidden_dim = 5;
  config.mlp_hidden_layers = 1;
  config.activation = activation;
  config.features.pressure = true;
  inst.params = init_params(config, seed + 1);
  // Non-trivial statistics and biases so every code path carries signal.
  inst.params.for_each_tensor([&](std::span<double> t) {
    for (auto& v : t) v += 0.3 * u(rng);
  });
  auto random_stats = [&](int dim) {
    FeatureStats s = FeatureStats::identity(dim);
    for (int k = 0; k < dim; ++k) {
      s.mean(k) = 0.2 * u(rng);
      s.std(k) = 0.5 + std::abs(u(rng));
    }
    return s;
  };
  inst.params.node_stats = random_stats(config.features.node_input_dim());
  inst.params.edge_stats = random_stats(FeatureLayout::edge_input_dim());
  inst.params.target_stats = random_stats(config.features.output_dim());

  RewireParams rp;
  rp.alpha_percent = 50.0;
  rp.beta = 0.5;
  rp.layers = config.layers;
  inst.schedule = build_schedule(graph, inst.current, rp);
  return inst;
}

}  // namespace oracle

