#include "sigmaforge/classifiers.hpp"

#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sigmaforge {
namespace {

// {(0,0) -> 0, (1,1) -> 1} x copies, with tiny noise.
FeatureMatrix corner_data(int copies, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix d;
  d.columns = {"a", "b"};
  d.features.resize(2 * copies, 2);
  for (int i = 0; i < 2 * copies; ++i) {
    const int label = i % 2;
    d.features(i, 0) = label + uniform(rng, -0.01, 0.01);
    d.features(i, 1) = label + uniform(rng, -0.01, 0.01);
    d.labels.push_back(label);
  }
  return d;
}

const DatasetSplit& synthetic_split() {
  static const DatasetSplit s = split_train_test(synth_dataset(AttackGroup::Dos, 400, 3.0, 7), 0.1, 7);
  return s;
}

class EveryVariant : public ::testing::TestWithParam<ClassifierVariant> {};

TEST_P(EveryVariant, FitsCornersPerfectly) {
  ClassifierModel m(GetParam(), ClassifierParams{}.with_seed(1));
  const FeatureMatrix d = corner_data(20, 3);
  m.fit(d);
  EXPECT_TRUE(m.fitted());
  EXPECT_EQ(accuracy(m, d), 1.0);
}

TEST_P(EveryVariant, SyntheticTestAccuracyAtLeast95) {
  ClassifierModel m(GetParam(), ClassifierParams{}.with_seed(2));
  m.fit(synthetic_split().train);
  EXPECT_GE(accuracy(m, synthetic_split().test), 0.95);
}

TEST_P(EveryVariant, SingleClassIsAnError) {
  FeatureMatrix d = corner_data(5, 1);
  std::fill(d.labels.begin(), d.labels.end(), 0);
  ClassifierModel m(GetParam());
  EXPECT_THROW(m.fit(d), std::invalid_argument);
}

TEST_P(EveryVariant, UnfittedOrWrongWidthIsAnError) {
  ClassifierModel m(GetParam());
  EXPECT_THROW(m.predict_proba(Matrix::Zero(1, 2)), std::logic_error);
  m.fit(corner_data(10, 2));
  EXPECT_THROW(m.predict_proba(Matrix::Zero(1, 3)), std::invalid_argument);
}

TEST_P(EveryVariant, DeterministicRefit) {
  ClassifierModel a(GetParam(), ClassifierParams{}.with_seed(5));
  ClassifierModel b(GetParam(), ClassifierParams{}.with_seed(5));
  a.fit(synthetic_split().train);
  b.fit(synthetic_split().train);
  EXPECT_TRUE(a.predict_proba(synthetic_split().test.features) == b.predict_proba(synthetic_split().test.features));
}

TEST_P(EveryVariant, ProbabilitiesInUnitIntervalOnRandomRows) {
  ClassifierModel m(GetParam(), ClassifierParams{}.with_seed(3));
  m.fit(synthetic_split().train);
  Rng rng(8);
  Matrix rows(500, 70);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    // Half inside the unit cube, half far outside it.
    const double span = r % 2 == 0 ? 1.0 : 50.0;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(r, c) = uniform(rng, -span + 1.0, span);
  }
  const Vector p = m.predict_proba(rows);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    ASSERT_TRUE(std::isfinite(p[i]));
    ASSERT_GE(p[i], 0.0);
    ASSERT_LE(p[i], 1.0);
  }
}

TEST_P(EveryVariant, JsonRoundTripPreservesPredictions) {
  ClassifierModel m(GetParam(), ClassifierParams{}.with_seed(4));
  m.fit(synthetic_split().train);
  const nlohmann::json j = m.to_json();
  EXPECT_EQ(j.at("variant"), std::string(to_string(GetParam())));
  const ClassifierModel back = ClassifierModel::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.predict_proba(synthetic_split().test.features) ==
              m.predict_proba(synthetic_split().test.features));
}

INSTANTIATE_TEST_SUITE_P(Classifiers, EveryVariant, ::testing::ValuesIn(kAllVariants),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(RandomForest, ProbabilityIsVoteFraction) {
  ClassifierParams p;
  p.forest.n_trees = 10;
  p.forest.seed = 3;
  ClassifierModel m(ClassifierVariant::RandomForest, p);
  m.fit(synthetic_split().train);
  const Matrix& rows = synthetic_split().test.features;
  const Vector proba = m.predict_proba(rows);
  const std::vector<int> votes = m.forest_votes(rows);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    // Oracle: walk every tree by hand.
    int hand = 0;
    for (const DecisionTree& t : m.forest()->trees) hand += t.predict(rows.row(r).data());
    ASSERT_EQ(votes[static_cast<std::size_t>(r)], hand);
    ASSERT_EQ(proba[r], hand / 10.0);
  }
}

TEST(RandomForest, SevenOfTenVotesGiveSevenTenths) {
  ClassifierParams p;
  p.forest.n_trees = 10;
  ClassifierModel m(ClassifierVariant::RandomForest, p);
  m.fit(corner_data(10, 1));
  // Replace the fitted trees with stumps whose leaves vote a fixed class.
  ForestModel& forest = const_cast<ForestModel&>(*m.forest());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    forest.trees[t].nodes = {DecisionTree::Node{-1, 0.0, -1, -1, t < 7 ? 1 : 0}};
  }
  EXPECT_DOUBLE_EQ(m.predict_proba(Matrix::Zero(1, 2))[0], 0.7);
}

TEST(RandomForest, MoreTreesKeepUnanimousPredictions) {
  const FeatureMatrix& train = synthetic_split().train;
  const Matrix& rows = synthetic_split().test.features;
  ClassifierParams small;
  small.forest.n_trees = 10;
  small.forest.seed = 9;
  ClassifierParams large = small;
  large.forest.n_trees = 40;
  ClassifierModel a(ClassifierVariant::RandomForest, small);
  ClassifierModel b(ClassifierVariant::RandomForest, large);
  a.fit(train);
  b.fit(train);
  const Vector pa = a.predict_proba(rows);
  const Vector pb = b.predict_proba(rows);
  // Per-tree seeds make the first 10 trees of both forests identical, so a
  // unanimous large forest implies the same unanimous small forest.
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (std::size_t t = 0; t < 10; ++t) {
      ASSERT_EQ(a.forest()->trees[t].predict(rows.row(r).data()), b.forest()->trees[t].predict(rows.row(r).data()));
    }
    if (pb[r] == 0.0 || pb[r] == 1.0) {
      EXPECT_EQ(pa[r], pb[r]) << "row " << r;
    }
  }
}

TEST(NaiveBayes, SymmetricClassesMidpointIsHalf) {
  FeatureMatrix d;
  d.columns = {"a", "b"};
  d.features.resize(4, 2);
  d.features << 0, 0, 0, 2, 2, 0, 2, 2;
  d.labels = {0, 0, 1, 1};
  ClassifierModel m(ClassifierVariant::GaussianNb);
  m.fit(d);
  Matrix mid(1, 2);
  mid << 1, 1;
  EXPECT_NEAR(m.predict_proba(mid)[0], 0.5, 1e-12);
}

TEST(NaiveBayes, ConstantFeatureDoesNotDivideByZero) {
  FeatureMatrix d;
  d.columns = {"const", "x"};
  d.features.resize(6, 2);
  d.features << 1, 0.1, 1, 0.2, 1, 0.15, 1, 0.9, 1, 0.8, 1, 0.85;
  d.labels = {0, 0, 0, 1, 1, 1};
  ClassifierModel m(ClassifierVariant::GaussianNb, ClassifierParams{});
  m.fit(d);
  const NbModel& nb = *m.naive_bayes();
  EXPECT_GE(nb.var[0][0], 1e-9);
  const Vector p = m.predict_proba(d.features);
  EXPECT_TRUE(p.allFinite());
  EXPECT_EQ(accuracy(m, d), 1.0);
}

TEST(NaiveBayes, PosteriorMatchesHandComputedGaussians) {
  const FeatureMatrix d = corner_data(15, 6);
  ClassifierModel m(ClassifierVariant::GaussianNb);
  m.fit(d);
  // Oracle: class means/variances and the posterior computed here.
  double mean[2][2] = {}, var[2][2] = {};
  int n[2] = {};
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const int y = d.labels[i];
    ++n[y];
    for (int c = 0; c < 2; ++c) mean[y][c] += d.features(static_cast<Eigen::Index>(i), c);
  }
  for (int y = 0; y < 2; ++y) {
    for (int c = 0; c < 2; ++c) mean[y][c] /= n[y];
  }
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const int y = d.labels[i];
    for (int c = 0; c < 2; ++c) {
      const double diff = d.features(static_cast<Eigen::Index>(i), c) - mean[y][c];
      var[y][c] += diff * diff / n[y];
    }
  }
  double max_var = 0;
  for (int c = 0; c < 2; ++c) {
    // Smoothing is relative to the pooled per-feature variance.
    double mu = 0, v = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) mu += d.features(static_cast<Eigen::Index>(i), c);
    mu /= static_cast<double>(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      v += std::pow(d.features(static_cast<Eigen::Index>(i), c) - mu, 2) / static_cast<double>(d.rows());
    }
    max_var = std::max(max_var, v);
  }
  Matrix q(1, 2);
  q << 0.52, 0.47;
  double log_post[2];
  for (int y = 0; y < 2; ++y) {
    log_post[y] = std::log(static_cast<double>(n[y]) / static_cast<double>(d.rows()));
    for (int c = 0; c < 2; ++c) {
      const double s2 = var[y][c] + 1e-9 * max_var;
      log_post[y] += -0.5 * std::log(2 * M_PI * s2) - std::pow(q(0, c) - mean[y][c], 2) / (2 * s2);
    }
  }
  const double oracle = 1.0 / (1.0 + std::exp(log_post[0] - log_post[1]));
  EXPECT_NEAR(m.predict_proba(q)[0], oracle, 1e-9);
}

TEST(LinearSvm, ZeroMarginGivesHalf) {
  ClassifierModel m(ClassifierVariant::LinearSvm);
  m.fit(corner_data(10, 4));
  const SvmModel& svm = *m.svm();
  // A point on the separating hyperplane: w.x + b = 0 along the weight direction.
  const Vector x = -svm.bias * svm.weights / svm.weights.squaredNorm();
  EXPECT_NEAR(m.predict_proba(x.transpose())[0], 0.5, 1e-12);
}

TEST(Mlp, ArchitectureIsSeventyToSixtyFourToThirtyTwoToOne) {
  ClassifierModel m(ClassifierVariant::Mlp);
  m.fit(synthetic_split().train);
  const DenseNet& net = m.mlp()->net;
  ASSERT_EQ(net.num_layers(), 3u);
  EXPECT_EQ(net.layers()[0].weights.rows(), 64);
  EXPECT_EQ(net.layers()[1].weights.rows(), 32);
  EXPECT_EQ(net.layers()[2].activation, Activation::Sigmoid);
}

TEST(DetectionRate, StrictThreshold) {
  Vector all_one = Vector::Ones(4);
  EXPECT_EQ(detection_rate(all_one), 1.0);
  Vector mixed(2);
  mixed << 0.6, 0.4;
  EXPECT_EQ(detection_rate(mixed), 0.5);
  Vector half(1);
  half << 0.5;
  EXPECT_EQ(detection_rate(half), 0.0);
  EXPECT_THROW(detection_rate(Vector(0)), std::invalid_argument);
}

TEST(VariantNames, ParseAliases) {
  EXPECT_EQ(parse_classifier_variant("random-forest"), ClassifierVariant::RandomForest);
  EXPECT_EQ(parse_classifier_variant("nb"), ClassifierVariant::GaussianNb);
  EXPECT_EQ(parse_classifier_variant("mlp"), ClassifierVariant::Mlp);
  EXPECT_EQ(parse_classifier_variant("linear-svm"), ClassifierVariant::LinearSvm);
  EXPECT_THROW(parse_classifier_variant("xgboost"), std::invalid_argument);
}

}  // namespace
}  // namespace sigmaforge
