#include "rewirenet/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rewirenet/errors.hpp"

namespace rewirenet {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

void MlpParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("MLP has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.bias.size() != l.weight.rows()) {
      throw std::invalid_argument("MLP layer " + std::to_string(k) + ": bias size does not match weight rows");
    }
    if (k > 0 && layers[k - 1].weight.rows() != l.weight.cols()) {
      throw std::invalid_argument("MLP layer " + std::to_string(k) + ": input width does not chain");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw std::invalid_argument("MLP layer " + std::to_string(k) + ": non-finite parameter");
    }
  }
  if (residual && input_dim() != output_dim()) {
    throw std::invalid_argument("residual MLP needs input dim == output dim");
  }
}

MlpParams make_mlp(const std::vector<int>& dims, Activation activation, std::mt19937_64& rng) {
  if (dims.size() < 2) throw std::invalid_argument("MLP needs at least input and output widths");
  MlpParams p;
  p.activation = activation;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k], out = dims[k + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z = params;
  for (auto& l : z.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return z;
}

namespace {

void activate(Activation a, Eigen::MatrixXd& m) {
  switch (a) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::identity: break;
  }
}

// d activation / d pre, evaluated at the pre-activation values.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& pre) {
  switch (a) {
    case Activation::relu: return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - pre.array().tanh().square()).matrix();
    case Activation::identity: break;
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

bool is_activated(const MlpParams& p, std::size_t k) { return k + 1 < p.layers.size() || p.activate_output; }

}  // namespace

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  if (params.layers.empty() || x.size() != params.input_dim()) {
    throw std::invalid_argument("dimension mismatch: MLP expects " +
                                std::to_string(params.layers.empty() ? 0 : params.input_dim()) + " inputs, got " +
                                std::to_string(x.size()));
  }
  Eigen::MatrixXd row = x.transpose();
  return mlp_forward_batch(params, row).transpose();
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x, MlpCache* cache) {
  if (params.layers.empty() || x.cols() != params.input_dim()) {
    throw std::invalid_argument("dimension mismatch: MLP expects " +
                                std::to_string(params.layers.empty() ? 0 : params.input_dim()) + " inputs, got " +
                                std::to_string(x.cols()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd h = x;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Eigen::MatrixXd z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(z);
    }
    if (is_activated(params, k)) activate(params.activation, z);
    h = std::move(z);
  }
  if (params.residual) h += x;
  return h;
}

Eigen::MatrixXd mlp_backward_batch(const MlpParams& params, const MlpCache& cache, const Eigen::MatrixXd& grad_out,
                                   MlpParams& grad) {
  Eigen::MatrixXd g = grad_out;
  for (std::size_t k = params.layers.size(); k-- > 0;) {
    if (is_activated(params, k)) g = g.cwiseProduct(activation_slope(params.activation, cache.pre[k]));
    grad.layers[k].weight.noalias() += g.transpose() * cache.inputs[k];
    grad.layers[k].bias += g.colwise().sum().transpose();
    g = g * params.layers[k].weight;
  }
  if (params.residual) g += grad_out;
  return g;
}

}  // namespace rewirenet
