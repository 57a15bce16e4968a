#include "sigmaforge/neuralnet.hpp"

#include "sigmaforge/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sigmaforge {
namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(rng, lo, hi);
  }
  return m;
}

DenseNet single_layer(Eigen::MatrixXd w, Vector b, Activation act) {
  return DenseNet({DenseLayer{std::move(w), std::move(b), act}});
}

TEST(InitNet, ShapesFollowDims) {
  const DenseNet net = init_net({70, 32, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 1);
  ASSERT_EQ(net.num_layers(), 2u);
  EXPECT_EQ(net.layers()[0].weights.rows(), 32);
  EXPECT_EQ(net.layers()[0].weights.cols(), 70);
  EXPECT_EQ(net.layers()[1].weights.rows(), 1);
  EXPECT_EQ(net.layers()[1].weights.cols(), 32);
  EXPECT_TRUE(net.layers()[0].bias.isZero());
}

TEST(InitNet, GlorotBoundAndDeterminism) {
  const DenseNet a = init_net({40, 20, 5}, {Activation::LeakyRelu, Activation::Identity}, 3);
  const DenseNet b = init_net({40, 20, 5}, {Activation::LeakyRelu, Activation::Identity}, 3);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == init_net({40, 20, 5}, {Activation::LeakyRelu, Activation::Identity}, 4));
  const double bound = std::sqrt(6.0 / (40.0 + 20.0));
  EXPECT_LE(a.layers()[0].weights.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(a.layers()[0].weights.cwiseAbs().maxCoeff(), 0.8 * bound);
}

TEST(InitNet, InvalidDims) {
  EXPECT_THROW(init_net({70}, {}, 0), std::invalid_argument);
  EXPECT_THROW(init_net({70, 0, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 0), std::invalid_argument);
  EXPECT_THROW(init_net({70, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 0), std::invalid_argument);
}

TEST(Forward, ZeroSigmoidHeadGivesHalf) {
  DenseNet net = init_net({5, 4, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 2);
  for (auto& l : net.mutable_layers()) {
    l.weights.setZero();
    l.bias.setZero();
  }
  Rng rng(1);
  const Matrix out = net.forward(random_matrix(rng, 6, 5));
  EXPECT_TRUE((out.array() == 0.5).all());
}

TEST(Forward, IdentityLayerPassesThrough) {
  const DenseNet net = single_layer(Eigen::MatrixXd::Identity(3, 3), Vector::Zero(3), Activation::Identity);
  Rng rng(2);
  const Matrix x = random_matrix(rng, 4, 3);
  EXPECT_TRUE(net.forward(x) == x);
}

TEST(Forward, HandValue) {
  Eigen::MatrixXd w(1, 2);
  w << 1, 1;
  const DenseNet net = single_layer(w, Vector::Zero(1), Activation::Identity);
  Matrix x(1, 2);
  x << 2, 3;
  EXPECT_EQ(net.forward(x)(0, 0), 5.0);
}

TEST(Forward, LeakyReluHandValue) {
  Eigen::MatrixXd w(2, 1);
  w << 1, -1;
  const DenseNet net = single_layer(w, Vector::Zero(2), Activation::LeakyRelu);
  Matrix x(1, 1);
  x << 3;
  const Matrix y = net.forward(x);
  EXPECT_EQ(y(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(y(0, 1), -3.0 * kLeakySlope);
}

TEST(Forward, WidthMismatchIsAnError) {
  const DenseNet net = init_net({3, 1}, {Activation::Sigmoid}, 0);
  EXPECT_THROW(net.forward(Matrix::Zero(2, 4)), std::invalid_argument);
}

TEST(Forward, RowsScoreIndependentlyOfBatch) {
  const DenseNet net = init_net({12, 9, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 8);
  Rng rng(9);
  const Matrix batch = random_matrix(rng, 37, 12, 0.0, 1.0);
  const Matrix all = net.forward(batch);
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    ASSERT_EQ(net.forward(batch.row(r))(0, 0), all(r, 0));
  }
}

TEST(ForwardProperty, SigmoidHeadStaysInOpenUnitInterval) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseNet net = init_net({6, 5, 1}, {Activation::LeakyRelu, Activation::Sigmoid},
                                  static_cast<std::uint64_t>(trial));
    const Matrix out = net.forward(random_matrix(rng, 20, 6, -5.0, 5.0));
    ASSERT_GT(out.minCoeff(), 0.0);
    ASSERT_LT(out.maxCoeff(), 1.0);
  }
}

TEST(L1Loss, HandValues) {
  Matrix p(1, 1), t(1, 1);
  p << 0.2;
  t << 1.0;
  EXPECT_DOUBLE_EQ(l1_loss(p, t), 0.8);
  EXPECT_EQ(l1_loss(p, p), 0.0);
  Matrix p2(2, 1), t2(2, 1);
  p2 << 0, 1;
  t2 << 1, 1;
  EXPECT_EQ(l1_loss(p2, t2), (1.0 + 0.0) / 2.0);
  EXPECT_THROW(l1_loss(p2, t), std::invalid_argument);
}

TEST(L1Loss, GradientIsSignOverRows) {
  Matrix p(2, 2), t(2, 2);
  p << 0.5, 0.2, 0.7, 0.7;
  t << 0.1, 0.4, 0.7, 0.9;
  const Matrix g = l1_loss_grad(p, t);
  EXPECT_EQ(g(0, 0), 0.5);
  EXPECT_EQ(g(0, 1), -0.5);
  EXPECT_EQ(g(1, 0), 0.0);
  EXPECT_EQ(g(1, 1), -0.5);
}

TEST(Backward, WithoutForwardIsAnError) {
  const DenseNet net = init_net({3, 1}, {Activation::Identity}, 0);
  EXPECT_THROW(net.backward(Matrix::Ones(1, 1)), std::logic_error);
}

TEST(Backward, ZeroLossGradGivesZeroGradients) {
  DenseNet net = init_net({4, 3, 2}, {Activation::LeakyRelu, Activation::Sigmoid}, 1);
  Rng rng(3);
  net.forward_train(random_matrix(rng, 5, 4));
  const Gradients g = net.backward(Matrix::Zero(5, 2));
  for (const auto& l : g.layers) {
    EXPECT_TRUE(l.weights.isZero());
    EXPECT_TRUE(l.bias.isZero());
  }
  EXPECT_TRUE(g.input.isZero());
}

TEST(Backward, SingleLinearNeuronSign) {
  // pred = w*x + b; d|pred - t|/dw = sign(pred - t) * x.
  Eigen::MatrixXd w(1, 1);
  w << 0.5;
  Vector b(1);
  b << 0.1;
  DenseNet net = single_layer(w, b, Activation::Identity);
  Matrix x(1, 1), t(1, 1);
  x << 2.0;
  t << 3.0;
  const Matrix pred = net.forward_train(x);
  const Gradients g = net.backward(l1_loss_grad(pred, t));
  const double oracle = (pred(0, 0) > t(0, 0) ? 1.0 : -1.0) * x(0, 0);
  EXPECT_EQ(g.layers[0].weights(0, 0), oracle);
  EXPECT_EQ(g.layers[0].bias(0), -1.0);
  EXPECT_EQ(g.input(0, 0), -0.5);
}

// Independent oracle: central differences computed here, not by gradcheck().
TEST(Backward, MatchesFiniteDifferencesOnSmoothLoss) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    DenseNet net = init_net({4, 6, 2}, {Activation::Sigmoid, Activation::Identity},
                            static_cast<std::uint64_t>(trial));
    const Matrix x = random_matrix(rng, 3, 4);
    // Weighted sum of outputs: loss is smooth, loss_grad is the weight matrix.
    const Matrix weights = random_matrix(rng, 3, 2);
    auto loss = [&](const DenseNet& n) { return (n.forward(x).array() * weights.array()).sum(); };
    net.forward_train(x);
    const Gradients g = net.backward(weights);
    const double h = 1e-6;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (Eigen::Index i = 0; i < net.layers()[l].weights.size(); ++i) {
        DenseNet plus = net, minus = net;
        plus.mutable_layers()[l].weights.data()[i] += h;
        minus.mutable_layers()[l].weights.data()[i] -= h;
        const double numeric = (loss(plus) - loss(minus)) / (2 * h);
        ASSERT_NEAR(g.layers[l].weights.data()[i], numeric, 1e-6);
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Matrix xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double numeric =
          ((net.forward(xp).array() * weights.array()).sum() - (net.forward(xm).array() * weights.array()).sum()) /
          (2 * h);
      ASSERT_NEAR(g.input.data()[i], numeric, 1e-6);
    }
  }
}

TEST(Gradcheck, RandomSmallNetsAgree) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = 1 + uniform_index(rng, 10);
    const auto hidden = 1 + uniform_index(rng, 8);
    const DenseNet net = init_net({in, hidden, 1}, {Activation::LeakyRelu, Activation::Sigmoid},
                                  static_cast<std::uint64_t>(100 + trial));
    const Matrix x = random_matrix(rng, 4, static_cast<Eigen::Index>(in));
    const Matrix t = random_matrix(rng, 4, 1, 0.0, 1.0);
    EXPECT_LT(gradcheck(net, x, t, 1e-5), 1e-4) << "trial " << trial;
  }
}

TEST(Gradcheck, ZeroGradientCaseAndBadStep) {
  DenseNet net = init_net({3, 1}, {Activation::Sigmoid}, 0);
  for (auto& l : net.mutable_layers()) {
    l.weights.setZero();
    l.bias.setZero();
  }
  // Output 0.5 everywhere; targets straddle it so the loss gradient cancels.
  Matrix x = Matrix::Ones(2, 3);
  Matrix t(2, 1);
  t << 0.0, 1.0;
  EXPECT_LT(gradcheck(net, x, t, 1e-5), 1e-4);
  EXPECT_THROW(gradcheck(net, x, t, 0.0), std::invalid_argument);
}

TEST(Adam, ZeroGradientIsFixpoint) {
  DenseNet net = init_net({5, 4, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 3);
  const DenseNet before = net;
  AdamState state = AdamState::for_net(net);
  Gradients g;
  for (const auto& l : net.layers()) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
  }
  for (int i = 0; i < 5; ++i) adam_step(net, g, state, 0.01);
  EXPECT_TRUE(net == before);
  EXPECT_EQ(state.t, 5);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Eigen::MatrixXd w(1, 2);
  w << 0.3, -0.2;
  DenseNet net = single_layer(w, Vector::Zero(1), Activation::Identity);
  AdamState state = AdamState::for_net(net);
  Gradients g;
  Eigen::MatrixXd gw(1, 2);
  gw << 0.4, -2.5;
  Vector gb(1);
  gb << 1e-3;
  g.layers.push_back({gw, gb});
  const double lr = 0.01;
  adam_step(net, g, state, lr);
  // Oracle: m1 = (1-b1) g, v1 = (1-b2) g^2, bias-corrected to g and g^2.
  auto expected = [&](double theta, double grad) {
    const double m = (1 - 0.9) * grad / (1 - 0.9);
    const double v = (1 - 0.999) * grad * grad / (1 - 0.999);
    return theta - lr * m / (std::sqrt(v) + 1e-8);
  };
  EXPECT_NEAR(net.layers()[0].weights(0, 0), expected(0.3, 0.4), 1e-15);
  EXPECT_NEAR(net.layers()[0].weights(0, 1), expected(-0.2, -2.5), 1e-15);
  EXPECT_NEAR(net.layers()[0].bias(0), expected(0.0, 1e-3), 1e-15);
  EXPECT_NEAR(net.layers()[0].weights(0, 0), 0.3 - lr, 1e-9);
  EXPECT_EQ(state.t, 1);
}

TEST(Adam, ShapeMismatchIsAnError) {
  DenseNet net = init_net({3, 1}, {Activation::Identity}, 0);
  AdamState state = AdamState::for_net(net);
  Gradients g;
  g.layers.push_back({Eigen::MatrixXd::Zero(2, 3), Vector::Zero(1)});
  EXPECT_THROW(adam_step(net, g, state, 0.01), std::invalid_argument);
}

Matrix toy_targets(const Matrix& x) {
  Matrix y(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) y(r, 0) = x(r, 0) + x(r, 1) > 1.0 ? 1.0 : 0.0;
  return y;
}

TEST(TrainL1, SeparableToyReachesFullTrainingAccuracy) {
  Rng rng(31);
  Matrix x(200, 2);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    // Keep a margin around the boundary x0 + x1 = 1.
    double a, b;
    do {
      a = uniform01(rng);
      b = uniform01(rng);
    } while (std::abs(a + b - 1.0) < 0.1);
    x(r, 0) = a;
    x(r, 1) = b;
  }
  const Matrix y = toy_targets(x);
  DenseNet net = init_net({2, 8, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 5);
  const std::vector<double> trace = train_l1(net, x, y, TrainConfig{30, 16, 0.01, 5});
  ASSERT_EQ(trace.size(), 30u);
  EXPECT_LT(trace.back(), trace.front());
  const Matrix p = net.forward(x);
  int correct = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) correct += (p(r, 0) > 0.5) == (y(r, 0) > 0.5) ? 1 : 0;
  EXPECT_EQ(correct, 200);
}

TEST(TrainL1, DeterministicTrajectories) {
  Rng rng(1);
  const Matrix x = random_matrix(rng, 50, 3, 0.0, 1.0);
  const Matrix y = toy_targets(x);
  DenseNet a = init_net({3, 4, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 2);
  DenseNet b = a;
  EXPECT_EQ(train_l1(a, x, y, TrainConfig{5, 8, 0.01, 9}), train_l1(b, x, y, TrainConfig{5, 8, 0.01, 9}));
  EXPECT_TRUE(a == b);
}

TEST(TrainConfig, Validation) {
  EXPECT_THROW((TrainConfig{0, 64, 0.01, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((TrainConfig{1, 0, 0.01, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((TrainConfig{1, 64, 0.0, 0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((TrainConfig{}.validate()));
}

TEST(DenseNetJson, RoundTripAndSchema) {
  const DenseNet net = init_net({4, 3, 1}, {Activation::LeakyRelu, Activation::Sigmoid}, 6);
  const nlohmann::json j = net.to_json();
  EXPECT_EQ(j.at("dims"), nlohmann::json({4, 3, 1}));
  EXPECT_EQ(j.at("activations"), nlohmann::json({"leaky-relu", "sigmoid"}));
  EXPECT_TRUE(j.contains("weights") && j.contains("biases"));
  EXPECT_TRUE(DenseNet::from_json(nlohmann::json::parse(j.dump())) == net);
}

TEST(Activation, NamesRoundTrip) {
  for (Activation a : {Activation::LeakyRelu, Activation::Sigmoid, Activation::Identity}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
  EXPECT_THROW(parse_activation("tanh"), std::invalid_argument);
}

}  // namespace
}  // namespace sigmaforge
