#include <doctest.h>

#include <random>

#include "rewirenet/mlp.hpp"

using namespace rewirenet;

namespace {

MlpParams single_layer(Eigen::MatrixXd w, Eigen::VectorXd b, Activation act, bool activate_output) {
  MlpParams p;
  p.layers.push_back({std::move(w), std::move(b)});
  p.activation = act;
  p.activate_output = activate_output;
  return p;
}

}  // namespace

TEST_CASE("mlp forward examples") {
  const auto id = single_layer(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), Activation::identity, false);
  const Eigen::Vector3d x(1.5, -2.0, 0.25);
  CHECK(mlp_forward(id, x) == x);

  Eigen::VectorXd b(2);
  b << 0.5, -1.0;
  const auto constant = single_layer(Eigen::MatrixXd::Zero(2, 3), b, Activation::identity, false);
  CHECK(mlp_forward(constant, x) == b);

  Eigen::MatrixXd w(1, 1);
  w << 2.0;
  const auto relu = single_layer(w, Eigen::VectorXd::Zero(1), Activation::relu, true);
  Eigen::VectorXd neg(1);
  neg << -3.0;
  CHECK(mlp_forward(relu, neg)(0) == 0.0);
  neg << 3.0;
  CHECK(mlp_forward(relu, neg)(0) == 6.0);
}

TEST_CASE("residual adds the input") {
  auto p = single_layer(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Ones(2), Activation::identity, false);
  p.residual = true;
  const Eigen::Vector2d x(3.0, 4.0);
  CHECK(mlp_forward(p, x) == Eigen::Vector2d(4.0, 5.0));
}

TEST_CASE("validation rejects broken shapes and non-finite weights") {
  auto p = single_layer(Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2), Activation::relu, false);
  CHECK_NOTHROW(p.validate());
  p.residual = true;
  CHECK_THROWS(p.validate());
  p.residual = false;
  p.layers.push_back({Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)});
  CHECK_THROWS(p.validate());
  p.layers.pop_back();
  p.layers[0].weight(0, 0) = std::nan("");
  CHECK_THROWS(p.validate());
  CHECK_THROWS(activation_from_string("gelu"));
}

TEST_CASE("batched forward matches per-row forward") {
  std::mt19937_64 rng(1);
  const auto p = make_mlp({4, 6, 3}, Activation::tanh, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 4);
  const auto y = mlp_forward_batch(p, x);
  for (Eigen::Index r = 0; r < 5; ++r) {
    const Eigen::VectorXd row = x.row(r).transpose();
    CHECK((mlp_forward(p, row) - y.row(r).transpose()).norm() < 1e-14);
  }
}

TEST_CASE("batched backward matches finite differences") {
  std::mt19937_64 rng(2);
  auto p = make_mlp({3, 4, 4, 3}, Activation::tanh, rng);
  p.residual = true;
  p.activate_output = true;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  const Eigen::MatrixXd target = Eigen::MatrixXd::Random(4, 3);
  auto loss = [&](const MlpParams& q, const Eigen::MatrixXd& in) {
    return 0.5 * (mlp_forward_batch(q, in) - target).squaredNorm();
  };

  MlpCache cache;
  const Eigen::MatrixXd y = mlp_forward_batch(p, x, &cache);
  auto grad = zeros_like(p);
  const Eigen::MatrixXd dx = mlp_backward_batch(p, cache, y - target, grad);

  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index k = 0; k < p.layers[l].weight.size(); ++k) {
      auto q = p;
      q.layers[l].weight.data()[k] += h;
      const double up = loss(q, x);
      q.layers[l].weight.data()[k] -= 2 * h;
      const double fd = (up - loss(q, x)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad.layers[l].weight.data()[k]));
    }
    for (Eigen::Index k = 0; k < p.layers[l].bias.size(); ++k) {
      auto q = p;
      q.layers[l].bias(k) += h;
      const double up = loss(q, x);
      q.layers[l].bias(k) -= 2 * h;
      const double fd = (up - loss(q, x)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad.layers[l].bias(k)));
    }
  }
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::MatrixXd xp = x, xm = x;
    xp.data()[k] += h;
    xm.data()[k] -= h;
    worst = std::max(worst, std::abs((loss(p, xp) - loss(p, xm)) / (2 * h) - dx.data()[k]));
  }
  CHECK(worst < 1e-8);
}
