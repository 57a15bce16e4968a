#include "sigmaforge/neuralnet.hpp"

#include "sigmaforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sigmaforge {
namespace {

void activate(Matrix& m, Activation act) {
  switch (act) {
    case Activation::LeakyRelu:
      m = m.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
      break;
    case Activation::Sigmoid:
      m = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      break;
    case Activation::Identity:
      break;
  }
}

// out(i, :) = bias + sum_k x(i, k) * W(:, k), accumulated in k order for every
// row separately.
Matrix affine_rowwise(const Matrix& x, const DenseLayer& layer) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index in = x.cols();
  Matrix out(rows, layer.weights.rows());
  for (Eigen::Index i = 0; i < rows; ++i) {
    auto row = out.row(i);
    row = layer.bias.transpose();
    for (Eigen::Index k = 0; k < in; ++k) {
      row.noalias() += x(i, k) * layer.weights.col(k).transpose();
    }
  }
  return out;
}

// Signs of every residual and hidden leaky-relu pre-activation; used to detect
// kinks crossed by a finite-difference probe.
std::vector<signed char> kink_signature(const DenseNet& net, const Matrix& batch, const Matrix& target) {
  std::vector<signed char> sig;
  Matrix x = batch;
  for (const DenseLayer& layer : net.layers()) {
    Matrix pre = affine_rowwise(x, layer);
    if (layer.activation == Activation::LeakyRelu) {
      for (Eigen::Index i = 0; i < pre.size(); ++i) sig.push_back(pre.data()[i] > 0.0 ? 1 : -1);
    }
    activate(pre, layer.activation);
    x = std::move(pre);
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double r = x.data()[i] - target.data()[i];
    sig.push_back(r > 0.0 ? 1 : (r < 0.0 ? -1 : 0));
  }
  return sig;
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::LeakyRelu: return "leaky-relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view text) {
  if (text == "leaky-relu") return Activation::LeakyRelu;
  if (text == "sigmoid") return Activation::Sigmoid;
  if (text == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("DenseNet: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw std::invalid_argument("DenseNet: empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) throw std::invalid_argument("DenseNet: bias size mismatch");
    if (l > 0 && layers_[l - 1].out_dim() != layer.in_dim()) {
      throw std::invalid_argument("DenseNet: layer " + std::to_string(l) + " does not chain");
    }
  }
}

std::size_t DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }

std::size_t DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

void DenseNet::check_input(const Matrix& batch) const {
  if (layers_.empty()) throw std::logic_error("DenseNet: network has no layers");
  if (static_cast<std::size_t>(batch.cols()) != input_dim()) {
    throw std::invalid_argument("DenseNet: batch has " + std::to_string(batch.cols()) +
                                " columns, network expects " + std::to_string(input_dim()));
  }
}

Matrix DenseNet::forward(const Matrix& batch) const {
  check_input(batch);
  Matrix x = affine_rowwise(batch, layers_.front());
  activate(x, layers_.front().activation);
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    Matrix next = affine_rowwise(x, layers_[l]);
    activate(next, layers_[l].activation);
    x = std::move(next);
  }
  return x;
}

Matrix DenseNet::forward_train(const Matrix& batch) {
  check_input(batch);
  cache_.clear();
  cache_.reserve(layers_.size());
  const Matrix* x = &batch;
  for (const DenseLayer& layer : layers_) {
    LayerCache c;
    c.input = *x;
    c.pre.noalias() = c.input * layer.weights.transpose();
    c.pre.rowwise() += layer.bias.transpose();
    c.out = c.pre;
    activate(c.out, layer.activation);
    cache_.push_back(std::move(c));
    x = &cache_.back().out;
  }
  return cache_.back().out;
}

Gradients DenseNet::backward(const Matrix& loss_grad) const {
  if (cache_.empty()) throw std::logic_error("DenseNet::backward: no cached forward pass");
  const LayerCache& last = cache_.back();
  if (loss_grad.rows() != last.out.rows() || loss_grad.cols() != last.out.cols()) {
    throw std::invalid_argument("DenseNet::backward: loss gradient shape mismatch");
  }
  Gradients g;
  g.layers.resize(layers_.size());
  Matrix delta = loss_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    const LayerCache& c = cache_[l];
    switch (layer.activation) {
      case Activation::LeakyRelu:
        delta.array() *= c.pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }).array();
        break;
      case Activation::Sigmoid:
        delta.array() *= (c.out.array() * (1.0 - c.out.array()));
        break;
      case Activation::Identity:
        break;
    }
    g.layers[l].weights.noalias() = delta.transpose() * c.input;
    g.layers[l].bias = delta.colwise().sum().transpose();
    Matrix prev;
    prev.noalias() = delta * layer.weights;
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

bool DenseNet::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

nlohmann::json DenseNet::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  nlohmann::json acts = nlohmann::json::array();
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  if (!layers_.empty()) dims.push_back(input_dim());
  for (const DenseLayer& l : layers_) {
    dims.push_back(l.out_dim());
    acts.push_back(std::string(to_string(l.activation)));
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index o = 0; o < l.weights.rows(); ++o) {
      for (Eigen::Index i = 0; i < l.weights.cols(); ++i) w.push_back(l.weights(o, i));
    }
    weights.push_back(std::move(w));
    biases.push_back(std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size()));
  }
  return {{"dims", dims}, {"activations", acts}, {"weights", weights}, {"biases", biases}};
}

DenseNet DenseNet::from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::vector<std::size_t>>();
  const auto acts = j.at("activations").get<std::vector<std::string>>();
  const auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
  const auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (dims.size() < 2 || acts.size() != dims.size() - 1 || weights.size() != acts.size() ||
      biases.size() != acts.size()) {
    throw std::invalid_argument("DenseNet JSON: inconsistent layer counts");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l < acts.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(dims[l]);
    const auto out = static_cast<Eigen::Index>(dims[l + 1]);
    if (weights[l].size() != static_cast<std::size_t>(in * out) || biases[l].size() != dims[l + 1]) {
      throw std::invalid_argument("DenseNet JSON: layer " + std::to_string(l) + " has wrong size");
    }
    DenseLayer layer;
    layer.weights.resize(out, in);
    for (Eigen::Index o = 0; o < out; ++o) {
      for (Eigen::Index i = 0; i < in; ++i) layer.weights(o, i) = weights[l][static_cast<std::size_t>(o * in + i)];
    }
    layer.bias = Eigen::Map<const Vector>(biases[l].data(), out);
    layer.activation = parse_activation(acts[l]);
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const DenseLayer& x = a.layers_[l];
    const DenseLayer& y = b.layers_[l];
    if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
        x.weights.cols() != y.weights.cols() || x.weights != y.weights || x.bias != y.bias) {
      return false;
    }
  }
  return true;
}

DenseNet init_net(const std::vector<std::size_t>& layer_dims, const std::vector<Activation>& activations,
                  std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("init_net: need at least input and output dims");
  if (activations.size() != layer_dims.size() - 1) {
    throw std::invalid_argument("init_net: need one activation per layer");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("init_net: layer dimensions must be positive");
  }
  Rng rng = make_rng(seed, "init_net");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weights.resize(out, in);
    for (Eigen::Index o = 0; o < out; ++o) {
      for (Eigen::Index i = 0; i < in; ++i) layer.weights(o, i) = uniform(rng, -a, a);
    }
    layer.bias = Vector::Zero(out);
    layer.activation = activations[l];
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

double l1_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("l1_loss: shape mismatch");
  }
  if (pred.rows() == 0) return 0.0;
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.rows());
}

Matrix l1_loss_grad(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("l1_loss_grad: shape mismatch");
  }
  const double scale = pred.rows() > 0 ? 1.0 / static_cast<double>(pred.rows()) : 0.0;
  return (pred - target).unaryExpr([scale](double d) {
    return d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
  });
}

AdamState AdamState::for_net(const DenseNet& net) {
  AdamState s;
  for (const DenseLayer& l : net.layers()) {
    s.m_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    s.v_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    s.m_bias.push_back(Vector::Zero(l.bias.size()));
    s.v_bias.push_back(Vector::Zero(l.bias.size()));
  }
  return s;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state, double lr) {
  auto& layers = net.mutable_layers();
  if (grads.layers.size() != layers.size() || state.m_weights.size() != layers.size()) {
    throw std::invalid_argument("adam_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.layers[l].weights.rows() != layers[l].weights.rows() ||
        grads.layers[l].weights.cols() != layers[l].weights.cols() ||
        grads.layers[l].bias.size() != layers[l].bias.size() ||
        state.m_weights[l].rows() != layers[l].weights.rows() ||
        state.m_weights[l].cols() != layers[l].weights.cols()) {
      throw std::invalid_argument("adam_step: shape mismatch in layer " + std::to_string(l));
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.eps;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, state.m_weights[l], state.v_weights[l], grads.layers[l].weights);
    update(layers[l].bias, state.m_bias[l], state.v_bias[l], grads.layers[l].bias);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
}

std::vector<double> train_l1(DenseNet& net, const Matrix& x, const Matrix& y, const TrainConfig& cfg,
                             AdamState* state) {
  cfg.validate();
  if (x.rows() != y.rows()) throw std::invalid_argument("train_l1: x and y row counts differ");
  if (static_cast<std::size_t>(y.cols()) != net.output_dim()) {
    throw std::invalid_argument("train_l1: target width does not match network output");
  }
  AdamState local;
  if (state == nullptr) {
    local = AdamState::for_net(net);
    state = &local;
  }
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs));
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  Matrix bx;
  Matrix by;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      bx.resize(static_cast<Eigen::Index>(len), x.cols());
      by.resize(static_cast<Eigen::Index>(len), y.cols());
      for (std::size_t r = 0; r < len; ++r) {
        bx.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(order[start + r]));
        by.row(static_cast<Eigen::Index>(r)) = y.row(static_cast<Eigen::Index>(order[start + r]));
      }
      const Matrix pred = net.forward_train(bx);
      loss_sum += l1_loss(pred, by);
      ++batches;
      adam_step(net, net.backward(l1_loss_grad(pred, by)), *state, cfg.learning_rate);
      if (!net.all_finite()) throw std::runtime_error("train_l1: non-finite parameter after Adam step");
    }
    net.clear_cache();
    trace.push_back(batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0);
  }
  return trace;
}

double gradcheck(const DenseNet& net, const Matrix& batch, const Matrix& target, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("gradcheck: h must be > 0");
  DenseNet work = net;
  const Matrix pred = work.forward_train(batch);
  const Gradients analytic = work.backward(l1_loss_grad(pred, target));
  work.clear_cache();

  const std::vector<signed char> base_sig = kink_signature(work, batch, target);
  double worst = 0.0;
  auto probe = [&](double& param, double a) {
    const double saved = param;
    param = saved + h;
    const double lp = l1_loss(work.forward(batch), target);
    const bool smooth_p = kink_signature(work, batch, target) == base_sig;
    param = saved - h;
    const double lm = l1_loss(work.forward(batch), target);
    const bool smooth_m = kink_signature(work, batch, target) == base_sig;
    param = saved;
    if (!smooth_p || !smooth_m) return;
    // A residual sitting exactly on zero makes the loss non-differentiable.
    if (std::find(base_sig.end() - pred.size(), base_sig.end(), 0) != base_sig.end()) return;
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  };
  auto& layers = work.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (Eigen::Index i = 0; i < layers[l].weights.size(); ++i) {
      probe(layers[l].weights.data()[i], analytic.layers[l].weights.data()[i]);
    }
    for (Eigen::Index i = 0; i < layers[l].bias.size(); ++i) {
      probe(layers[l].bias.data()[i], analytic.layers[l].bias.data()[i]);
    }
  }
  return worst;
}

}  // namespace sigmaforge
