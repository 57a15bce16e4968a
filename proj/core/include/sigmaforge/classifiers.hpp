#pragma once

#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/neuralnet.hpp"
#include "sigmaforge/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

namespace sigmaforge {

enum class ClassifierVariant { Mlp, RandomForest, LinearSvm, GaussianNb };

inline constexpr ClassifierVariant kAllVariants[] = {ClassifierVariant::Mlp, ClassifierVariant::RandomForest,
                                                     ClassifierVariant::LinearSvm,
                                                     ClassifierVariant::GaussianNb};

/// Short names used on the command line and in reports: nn, rf, svm, nb.
std::string_view to_string(ClassifierVariant v);
/// Accepts the short names plus "mlp", "random-forest", "linear-svm", "naive-bayes".
ClassifierVariant parse_classifier_variant(std::string_view text);

struct MlpParams {
  std::vector<std::size_t> hidden = {64, 32};
  TrainConfig train;
};

struct ForestParams {
  int n_trees = 50;
  int max_depth = 12;
  int min_samples_split = 2;
  /// 0 = round(sqrt(feature count)).
  int features_per_split = 0;
  std::uint64_t seed = 0;
};

struct SvmParams {
  double lambda = 1e-4;
  int epochs = 20;
  std::uint64_t seed = 0;
};

struct NbParams {
  /// Added variance, as a fraction of the largest per-feature variance.
  double var_smoothing = 1e-9;
};

struct ClassifierParams {
  MlpParams mlp;
  ForestParams forest;
  SvmParams svm;
  NbParams nb;

  /// Points every variant's seed at one value.
  ClassifierParams with_seed(std::uint64_t seed) const;
};

struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int vote = 0;  // leaf class
  };
  std::vector<Node> nodes;

  int predict(const double* row) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
};

struct SvmModel {
  Vector weights;
  double bias = 0.0;
};

struct NbModel {
  Vector mean[2];
  Vector var[2];
  double log_prior[2] = {0.0, 0.0};
};

struct MlpModel {
  DenseNet net;
};

/// One of four binary classifiers behind a common fit / predict_proba
/// contract. predict_proba returns P(attack | row) in [0,1].
class ClassifierModel {
 public:
  explicit ClassifierModel(ClassifierVariant variant, ClassifierParams params = {});

  ClassifierVariant variant() const { return variant_; }
  const ClassifierParams& params() const { return params_; }
  bool fitted() const { return !std::holds_alternative<std::monostate>(state_); }
  std::size_t input_dim() const { return input_dim_; }

  /// Refits from scratch. Throws if the data hold a single class.
  void fit(const Matrix& features, const std::vector<int>& labels);
  void fit(const FeatureMatrix& data) { fit(data.features, data.labels); }

  Vector predict_proba(const Matrix& rows) const;

  /// Number of trees voting attack, for the random forest variant.
  std::vector<int> forest_votes(const Matrix& rows) const;

  const ForestModel* forest() const { return std::get_if<ForestModel>(&state_); }
  const SvmModel* svm() const { return std::get_if<SvmModel>(&state_); }
  const NbModel* naive_bayes() const { return std::get_if<NbModel>(&state_); }
  const MlpModel* mlp() const { return std::get_if<MlpModel>(&state_); }

  nlohmann::json to_json() const;
  static ClassifierModel from_json(const nlohmann::json& j);

 private:
  ClassifierVariant variant_;
  ClassifierParams params_;
  std::size_t input_dim_ = 0;
  std::variant<std::monostate, MlpModel, ForestModel, SvmModel, NbModel> state_;
};

/// Binary classifier architecture: in -> 64 -> 32 -> 1, leaky-relu hidden, sigmoid head.
DenseNet make_mlp(std::size_t input_dim, const MlpParams& params, std::uint64_t seed);

/// Fraction of probabilities strictly above threshold.
double detection_rate(const Vector& probabilities, double threshold = 0.5);
double detection_rate(const BatchScorer& scorer, const Matrix& attacks, double threshold = 0.5);
double detection_rate(const ClassifierModel& model, const Matrix& attacks, double threshold = 0.5);

/// Share of rows whose thresholded prediction matches the label.
double accuracy(const ClassifierModel& model, const FeatureMatrix& data, double threshold = 0.5);

}  // namespace sigmaforge
