#pragma once

#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rewirenet {

enum class Activation { relu, tanh, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Affine-activation chain. The activation follows every hidden layer; the
/// last layer is activated only when `activate_output` is set. With
/// `residual`, the input is added to the final output.
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::relu;
  bool residual = false;
  bool activate_output = false;

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }

  /// Throws std::invalid_argument if dimensions do not chain, residual
  /// shapes differ, or any parameter is non-finite.
  void validate() const;

  /// Visits weight then bias of each layer as flat mutable spans.
  template <class F>
  void for_each_tensor(F&& f) {
    for (auto& layer : layers) {
      f(std::span<double>(layer.weight.data(), static_cast<std::size_t>(layer.weight.size())));
      f(std::span<double>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())));
    }
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for (const auto& layer : layers) {
      f(std::span<const double>(layer.weight.data(), static_cast<std::size_t>(layer.weight.size())));
      f(std::span<const double>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())));
    }
  }
};

/// Layer widths `dims` (input first). Glorot-uniform weights, zero biases.
MlpParams make_mlp(const std::vector<int>& dims, Activation activation, std::mt19937_64& rng);

/// Same shapes as `params`, all zeros.
MlpParams zeros_like(const MlpParams& params);

/// Single-vector evaluation.
Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);

/// Values retained by the batched forward pass for the backward pass.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer, batch x in
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer, batch x out
};

/// Rows are samples: x is batch x input_dim.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x, MlpCache* cache = nullptr);

/// Accumulates parameter gradients into `grad` and returns d loss / d input.
Eigen::MatrixXd mlp_backward_batch(const MlpParams& params, const MlpCache& cache, const Eigen::MatrixXd& grad_out,
                                   MlpParams& grad);

}  // namespace rewirenet
