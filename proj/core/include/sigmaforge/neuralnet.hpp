#pragma once

#include "sigmaforge/types.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <string_view>
#include <vector>

namespace sigmaforge {

enum class Activation { LeakyRelu, Sigmoid, Identity };

inline constexpr double kLeakySlope = 0.01;

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Vector bias;              // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

struct LayerGradient {
  Eigen::MatrixXd weights;
  Vector bias;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  /// d(loss)/d(input batch), same shape as the batch.
  Matrix input;
};

/// Fully connected feed-forward network.
///
/// forward() is read-only and safe to share across threads; it evaluates each
/// row independently, so a row's output does not depend on the batch it was
/// scored in. forward_train() caches the activations that backward() needs.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  Matrix forward(const Matrix& batch) const;
  Matrix forward_train(const Matrix& batch);
  /// Backpropagates loss_grad = d(loss)/d(output) through the cached pass.
  Gradients backward(const Matrix& loss_grad) const;
  bool has_cache() const { return !cache_.empty(); }
  void clear_cache() { cache_.clear(); }

  bool all_finite() const;

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& j);

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  struct LayerCache {
    Matrix input;
    Matrix pre;
    Matrix out;
  };

  void check_input(const Matrix& batch) const;

  std::vector<DenseLayer> layers_;
  std::vector<LayerCache> cache_;
};

/// Glorot-uniform weights, zero biases.
DenseNet init_net(const std::vector<std::size_t>& layer_dims, const std::vector<Activation>& activations,
                  std::uint64_t seed);

/// Mean over rows of the per-row sum of absolute differences.
double l1_loss(const Matrix& pred, const Matrix& target);
/// Gradient of l1_loss with respect to pred (sign(pred - target) / rows; 0 at ties).
Matrix l1_loss_grad(const Matrix& pred, const Matrix& target);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights;
  std::vector<Eigen::MatrixXd> v_weights;
  std::vector<Vector> m_bias;
  std::vector<Vector> v_bias;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const DenseNet& net);
};

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state, double lr);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Minibatch Adam on l1_loss(net(x), y). Rows are reshuffled every epoch.
/// Returns the mean batch loss of each epoch. Throws if any parameter turns
/// non-finite.
std::vector<double> train_l1(DenseNet& net, const Matrix& x, const Matrix& y, const TrainConfig& cfg,
                             AdamState* state = nullptr);

/// Largest relative error between backprop and central differences of
/// l1_loss over all parameters. Parameters whose +/-h perturbation moves any
/// residual or hidden pre-activation across a kink are skipped.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
double gradcheck(const DenseNet& net, const Matrix& batch, const Matrix& target, double h);

}  // namespace sigmaforge
