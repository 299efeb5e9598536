#include <doctest.h>

#include "oracles.hpp"
#include "rewirenet/processor.hpp"

using namespace rewirenet;

namespace {

MlpParams linear(std::initializer_list<double> row) {
  MlpParams p;
  Eigen::MatrixXd w(1, static_cast<Eigen::Index>(row.size()));
  Eigen::Index k = 0;
  for (double v : row) w(0, k++) = v;
  p.layers.push_back({w, Eigen::VectorXd::Zero(1)});
  p.activation = Activation::identity;
  return p;
}

MlpParams identity_mlp(int dim) {
  MlpParams p;
  p.layers.push_back({Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)});
  p.activation = Activation::identity;
  return p;
}

FrameState still_frame(std::size_t n) {
  FrameState f;
  f.velocity.assign(n, Vec2{0.0, 0.0});
  return f;
}

ModelConfig small_config(int layers, Activation act = Activation::tanh) {
  ModelConfig c;
  c.layers = layers;
  c.hidden_dim = 6;
  c.mlp_hidden_layers = 1;
  c.activation = act;
  return c;
}

/// d o_i[0] / d vx_s by central differences through the full pipeline.
double output_sensitivity(const ProcessorParams& p, const MeshGraph& g, const FrameState& f, const RewireSchedule& s,
                          NodeId i, NodeId src) {
  const double h = 1e-5;
  auto up = f, down = f;
  up.velocity[static_cast<std::size_t>(src)][0] += h;
  down.velocity[static_cast<std::size_t>(src)][0] -= h;
  return (forward(p, g, up, s).values(i, 0) - forward(p, g, down, s).values(i, 0)) / (2 * h);
}

}  // namespace

TEST_CASE("identity node encoder exposes the feature layout") {
  const auto g = oracle::make_graph(1, {});
  ModelConfig c = small_config(1);
  c.mlp_hidden_layers = 0;
  auto p = init_params(c, 0);
  p.node_encoder = identity_mlp(6);
  const auto latents = encode(p, g, still_frame(1));
  Eigen::RowVectorXd expected(6);
  expected << 0, 0, 1, 0, 0, 0;
  CHECK(latents.node_latents.row(0) == expected);
}

TEST_CASE("edge features use receiver minus sender") {
  const MeshGraph g({{0.0, 0.0}, {3.0, 4.0}}, {NodeType::fluid, NodeType::fluid}, {{0, 1}});
  const auto x = edge_features(g, {DirectedEdge{0, 1}, DirectedEdge{1, 0}});
  CHECK(x(0, 0) == -3.0);
  CHECK(x(0, 1) == -4.0);
  CHECK(x(0, 2) == 5.0);
  CHECK(x(1, 0) == 3.0);
  CHECK(x(1, 2) == 5.0);
}

TEST_CASE("frame that does not fit the graph is rejected") {
  const auto g = oracle::path_graph(3);
  const auto p = init_params(small_config(1), 0);
  CHECK_THROWS(encode(p, g, still_frame(2)));
  CHECK_THROWS(encode(p, g, FrameState{}));
}

TEST_CASE("hand-set two-node block") {
  const auto g = oracle::path_graph(2);
  BlockParams block{linear({1, 1, 1}), linear({1, 1})};
  LatentState s;
  s.node_latents.resize(2, 1);
  s.node_latents << 1, 2;
  s.edges = g.directed_edges();
  s.edge_latents = Eigen::MatrixXd::Zero(2, 1);
  const auto out = message_passing_block(block, false, s, s.edges);
  CHECK(out.edge_latents(0, 0) == 3.0);
  CHECK(out.edge_latents(1, 0) == 3.0);
  CHECK(out.node_latents(0, 0) == 4.0);
  CHECK(out.node_latents(1, 0) == 5.0);
}

TEST_CASE("zero block maps with residual leave latents unchanged") {
  const auto g = oracle::path_graph(3);
  BlockParams block{linear({0, 0, 0}), linear({0, 0})};
  LatentState s;
  s.node_latents.resize(3, 1);
  s.node_latents << 1, -2, 3;
  s.edges = g.directed_edges();
  s.edge_latents = Eigen::MatrixXd::Random(4, 1);
  const auto out = message_passing_block(block, true, s, s.edges);
  CHECK(out.node_latents == s.node_latents);
  CHECK(out.edge_latents == s.edge_latents);
}

TEST_CASE("isolated node aggregates zero") {
  BlockParams block{linear({1, 1, 1}), linear({2, 7})};
  LatentState s;
  s.node_latents.resize(1, 1);
  s.node_latents << 1.5;
  s.edge_latents.resize(0, 1);
  const auto out = message_passing_block(block, false, s, {});
  CHECK(out.node_latents(0, 0) == 3.0);
}

TEST_CASE("zero decoder gives zero output and a constant rollout step") {
  const auto g = oracle::path_graph(4);
  auto p = init_params(small_config(2), 3);
  p.decoder = zeros_like(p.decoder);
  FrameState f = still_frame(4);
  f.velocity[1] = {0.5, -1.0};
  const RewireSchedule s{{}, 2, RewireVariant::none};
  const auto out = forward(p, g, f, s);
  CHECK(out.values.isZero(0.0));
  const auto next = euler_update(f, out);
  CHECK(next.velocity == f.velocity);
  CHECK(next.time_index == 1);
}

TEST_CASE("forward rejects a schedule built for another depth") {
  const auto g = oracle::path_graph(3);
  const auto p = init_params(small_config(2), 0);
  CHECK_THROWS(forward(p, g, still_frame(3), RewireSchedule{{}, 3, RewireVariant::none}));
  ModelConfig bad = small_config(0);
  CHECK_THROWS(init_params(bad, 0));
}

TEST_CASE("variant none and adaptive agree when no pair is scheduled") {
  const auto g = oracle::cycle_graph(6);
  const auto p = init_params(small_config(3), 4);
  FrameState f = still_frame(6);
  for (std::size_t i = 0; i < 6; ++i) f.velocity[i] = {0.1 * static_cast<double>(i), 0.0};
  const auto a = forward(p, g, f, RewireSchedule{{}, 3, RewireVariant::adaptive});
  const auto b = forward(p, g, f, RewireSchedule{{}, 3, RewireVariant::none});
  CHECK(a.values == b.values);
}

TEST_CASE("euler update examples") {
  FrameState f;
  f.velocity = {{1.0, 2.0}};
  f.pressure = std::vector<double>{2.0};
  NodeOutput o{Eigen::MatrixXd(1, 3)};
  o.values << 0.5, -1.0, -0.5;
  const auto n = euler_update(f, o);
  CHECK(n.velocity[0] == Vec2{1.5, 1.0});
  CHECK((*n.pressure)[0] == 1.5);
  NodeOutput wrong{Eigen::MatrixXd::Zero(1, 2)};
  CHECK_THROWS(euler_update(f, wrong));
}

TEST_CASE("boundary nodes take prescribed values") {
  const MeshGraph g({{0, 0}, {1, 0}}, {NodeType::inflow, NodeType::fluid}, {{0, 1}});
  FrameState f = still_frame(2), b = still_frame(2);
  b.velocity = {{9.0, 9.0}, {7.0, 7.0}};
  NodeOutput o{Eigen::MatrixXd::Ones(2, 2)};
  const auto n = euler_update(g, f, o, b);
  CHECK(n.velocity[0] == Vec2{9.0, 9.0});
  CHECK(n.velocity[1] == Vec2{1.0, 1.0});
}

TEST_CASE("loss of a zero model is the mean squared state change over fluid nodes") {
  const MeshGraph g({{0, 0}, {1, 0}, {2, 0}}, {NodeType::wall, NodeType::fluid, NodeType::fluid}, {{0, 1}, {1, 2}});
  auto p = zeros_like(init_params(small_config(1), 0));
  FrameState a = still_frame(3), b = still_frame(3);
  b.velocity = {{100.0, 100.0}, {1.0, 2.0}, {-3.0, 0.5}};
  const RewireSchedule s{{}, 1, RewireVariant::none};
  const double expected = (1.0 + 4.0 + 9.0 + 0.25) / 4.0;
  CHECK(loss_only(p, g, a, b, s) == doctest::Approx(expected).epsilon(1e-15));
  const auto lg = loss_and_grad(p, g, a, b, s);
  CHECK(lg.loss == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("perfect prediction has zero loss and zero gradient") {
  const auto g = oracle::path_graph(3);
  auto p = init_params(small_config(1), 0);
  const FrameState f = still_frame(3);
  const RewireSchedule s{{}, 1, RewireVariant::none};
  const auto next = euler_update(f, forward(p, g, f, s));
  const auto lg = loss_and_grad(p, g, f, next, s);
  CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-24));
  for (double v : lg.grad.flatten()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("analytic gradients match finite differences") {
  for (int n : {4, 6, 8}) {
    for (auto act : {Activation::tanh, Activation::identity}) {
      const auto inst = oracle::random_gradient_instance(n, act, 100 + static_cast<std::uint64_t>(n));
      const auto check = oracle::check_gradient(inst.params, inst.graph, inst.current, inst.next, inst.schedule);
      CAPTURE(n);
      CHECK(check.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("flatten and assign round-trip") {
  auto p = init_params(small_config(2), 9);
  auto flat = p.flatten();
  CHECK(flat.size() == p.parameter_count());
  for (auto& v : flat) v *= 2.0;
  p.assign(flat);
  CHECK(p.flatten() == flat);
  flat.pop_back();
  CHECK_THROWS(p.assign(flat));
}

TEST_CASE("without rewiring, outputs only see inputs within L hops") {
  const auto g = oracle::path_graph(8);
  const auto p = init_params(small_config(3), 5);
  FrameState f = still_frame(8);
  for (std::size_t i = 0; i < 8; ++i) f.velocity[i] = {0.2 * static_cast<double>(i) - 0.5, 0.1};
  const RewireSchedule s{{}, 3, RewireVariant::none};
  CHECK(std::abs(output_sensitivity(p, g, f, s, 0, 3)) > 1e-8);
  CHECK(output_sensitivity(p, g, f, s, 0, 4) == 0.0);
  CHECK(output_sensitivity(p, g, f, s, 0, 7) == 0.0);
}

TEST_CASE("a scheduled pair opens a shortcut from its activation layer") {
  const auto g = oracle::path_graph(10);
  const auto p = init_params(small_config(3), 6);
  FrameState f = still_frame(10);
  for (std::size_t i = 0; i < 10; ++i) f.velocity[i] = {0.1 * static_cast<double>(i), -0.2};
  RewireSchedule s{{RewirePair{0, 9, 9, 0.9, 3.0, 3}}, 3, RewireVariant::adaptive};
  CHECK(std::abs(output_sensitivity(p, g, f, s, 0, 9)) > 1e-8);
  // Activated in the last block, the shortcut still cannot reach node 1 from 9 (needs one more hop).
  CHECK(output_sensitivity(p, g, f, s, 1, 9) == 0.0);
  s.pairs[0].activation_layer = 2;
  CHECK(std::abs(output_sensitivity(p, g, f, s, 1, 9)) > 1e-8);
}
