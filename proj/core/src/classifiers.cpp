#include "sigmaforge/classifiers.hpp"

#include "sigmaforge/parallel.hpp"
#include "sigmaforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sigmaforge {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void check_binary(const Matrix& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw std::invalid_argument("fit: feature and label counts differ");
  }
  bool has[2] = {false, false};
  for (int l : labels) has[l != 0 ? 1 : 0] = true;
  if (!has[0] || !has[1]) throw std::invalid_argument("fit: training data must contain both classes");
}

// ---- random forest ------------------------------------------------------

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, const ForestParams& p, int features_per_split,
              std::uint64_t seed)
      : x_(x), y_(y), params_(p), k_(features_per_split), rng_(seed) {}

  DecisionTree build() {
    const auto n = static_cast<std::size_t>(x_.rows());
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = uniform_index(rng_, n);  // bootstrap
    features_.resize(static_cast<std::size_t>(x_.cols()));
    std::iota(features_.begin(), features_.end(), 0);
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += y_[i] != 0 ? 1 : 0;
    const std::size_t n = idx.size();
    tree_.nodes[static_cast<std::size_t>(id)].vote = 2 * pos > n ? 1 : 0;
    if (depth >= params_.max_depth || n < static_cast<std::size_t>(params_.min_samples_split) || pos == 0 ||
        pos == n) {
      return id;
    }
    const SplitChoice split = best_split(idx, static_cast<double>(pos));
    if (split.feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t i : idx) {
      (x_(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitChoice best_split(const std::vector<std::size_t>& idx, double pos_total) {
    const auto d = features_.size();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), d);
    for (std::size_t j = 0; j < k; ++j) std::swap(features_[j], features_[j + uniform_index(rng_, d - j)]);

    const double n = static_cast<double>(idx.size());
    SplitChoice best;
    best.impurity = gini(pos_total, n);
    std::vector<std::pair<double, int>> values(idx.size());
    for (std::size_t j = 0; j < k; ++j) {
      const auto f = static_cast<Eigen::Index>(features_[j]);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        values[r] = {x_(static_cast<Eigen::Index>(idx[r]), f), y_[idx[r]] != 0 ? 1 : 0};
      }
      std::sort(values.begin(), values.end());
      double left_pos = 0.0;
      for (std::size_t r = 0; r + 1 < values.size(); ++r) {
        left_pos += values[r].second;
        if (values[r].first == values[r + 1].first) continue;
        const double nl = static_cast<double>(r + 1);
        const double nr = n - nl;
        const double impurity = (nl * gini(left_pos, nl) + nr * gini(pos_total - left_pos, nr)) / n;
        if (impurity < best.impurity - 1e-12) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (values[r].first + values[r + 1].first);
          best.impurity = impurity;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<int>& y_;
  const ForestParams& params_;
  int k_;
  Rng rng_;
  std::vector<std::size_t> features_;
  DecisionTree tree_;
};

ForestModel fit_forest(const Matrix& x, const std::vector<int>& y, const ForestParams& p) {
  if (p.n_trees < 1) throw std::invalid_argument("ForestParams: n_trees must be >= 1");
  if (p.max_depth < 1) throw std::invalid_argument("ForestParams: max_depth must be >= 1");
  int k = p.features_per_split;
  if (k <= 0) k = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(x.cols())))));
  ForestModel model;
  model.trees.resize(static_cast<std::size_t>(p.n_trees));
  parallel_for(model.trees.size(), [&](std::size_t t) {
    TreeBuilder builder(x, y, p, k, derive_seed(p.seed, "tree", t));
    model.trees[t] = builder.build();
  });
  return model;
}

// ---- linear SVM (Pegasos) ----------------------------------------------

SvmModel fit_svm(const Matrix& x, const std::vector<int>& y, const SvmParams& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("SvmParams: lambda must be > 0");
  if (p.epochs < 1) throw std::invalid_argument("SvmParams: epochs must be >= 1");
  const auto n = static_cast<std::size_t>(x.rows());
  const Eigen::Index d = x.cols();
  // Bias is the weight of a constant 1 feature (last slot).
  Vector w = Vector::Zero(d + 1);
  const double radius = 1.0 / std::sqrt(p.lambda);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double t = 0.0;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    Rng rng = make_rng(p.seed, "pegasos", static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      t += 1.0;
      const double eta = 1.0 / (p.lambda * t);
      const auto row = x.row(static_cast<Eigen::Index>(i));
      const double label = y[i] != 0 ? 1.0 : -1.0;
      const double margin = label * (row.dot(w.head(d)) + w[d]);
      w *= 1.0 - eta * p.lambda;
      if (margin < 1.0) {
        w.head(d) += (eta * label) * row.transpose();
        w[d] += eta * label;
      }
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
    }
  }
  SvmModel m;
  m.weights = w.head(d);
  m.bias = w[d];
  return m;
}

// ---- Gaussian naive Bayes ----------------------------------------------

NbModel fit_nb(const Matrix& x, const std::vector<int>& y, const NbParams& p) {
  NbModel m;
  const Eigen::Index d = x.cols();
  const double n = static_cast<double>(x.rows());
  const Vector all_mean = x.colwise().mean().transpose();
  const Vector all_var = ((x.rowwise() - all_mean.transpose()).array().square().colwise().sum() / n).transpose();
  const double eps = std::max(p.var_smoothing * all_var.maxCoeff(), 0.0);
  for (int c = 0; c < 2; ++c) {
    Vector sum = Vector::Zero(d);
    double count = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if ((y[static_cast<std::size_t>(r)] != 0 ? 1 : 0) == c) {
        sum += x.row(r).transpose();
        count += 1.0;
      }
    }
    m.mean[c] = sum / count;
    Vector sq = Vector::Zero(d);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if ((y[static_cast<std::size_t>(r)] != 0 ? 1 : 0) == c) {
        sq += (x.row(r).transpose() - m.mean[c]).array().square().matrix();
      }
    }
    m.var[c] = (sq / count).array() + eps;
    m.var[c] = m.var[c].cwiseMax(1e-9);
    m.log_prior[c] = std::log(count / n);
  }
  return m;
}

Vector predict_nb(const NbModel& m, const Matrix& rows) {
  Vector out(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    double ll[2];
    for (int c = 0; c < 2; ++c) {
      const auto diff = rows.row(r).transpose().array() - m.mean[c].array();
      ll[c] = m.log_prior[c] -
              0.5 * (m.var[c].array().log() + kLog2Pi + diff.square() / m.var[c].array()).sum();
    }
    out[r] = sigmoid(ll[1] - ll[0]);
  }
  return out;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

int DecisionTree::predict(const double* row) const {
  int id = 0;
  while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(id)];
    id = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(id)].vote;
}

std::string_view to_string(ClassifierVariant v) {
  switch (v) {
    case ClassifierVariant::Mlp: return "nn";
    case ClassifierVariant::RandomForest: return "rf";
    case ClassifierVariant::LinearSvm: return "svm";
    case ClassifierVariant::GaussianNb: return "nb";
  }
  return "nn";
}

ClassifierVariant parse_classifier_variant(std::string_view text) {
  if (text == "nn" || text == "mlp" || text == "neural-net") return ClassifierVariant::Mlp;
  if (text == "rf" || text == "random-forest") return ClassifierVariant::RandomForest;
  if (text == "svm" || text == "linear-svm") return ClassifierVariant::LinearSvm;
  if (text == "nb" || text == "naive-bayes") return ClassifierVariant::GaussianNb;
  throw std::invalid_argument("unknown classifier variant '" + std::string(text) + "'");
}

ClassifierParams ClassifierParams::with_seed(std::uint64_t seed) const {
  ClassifierParams p = *this;
  p.mlp.train.seed = seed;
  p.forest.seed = seed;
  p.svm.seed = seed;
  return p;
}

DenseNet make_mlp(std::size_t input_dim, const MlpParams& params, std::uint64_t seed) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), params.hidden.begin(), params.hidden.end());
  dims.push_back(1);
  std::vector<Activation> acts(params.hidden.size(), Activation::LeakyRelu);
  acts.push_back(Activation::Sigmoid);
  return init_net(dims, acts, seed);
}

ClassifierModel::ClassifierModel(ClassifierVariant variant, ClassifierParams params)
    : variant_(variant), params_(std::move(params)) {}

void ClassifierModel::fit(const Matrix& features, const std::vector<int>& labels) {
  check_binary(features, labels);
  input_dim_ = static_cast<std::size_t>(features.cols());
  switch (variant_) {
    case ClassifierVariant::Mlp: {
      MlpModel m{make_mlp(input_dim_, params_.mlp, params_.mlp.train.seed)};
      Matrix target(features.rows(), 1);
      for (Eigen::Index r = 0; r < features.rows(); ++r) target(r, 0) = labels[static_cast<std::size_t>(r)] != 0 ? 1.0 : 0.0;
      train_l1(m.net, features, target, params_.mlp.train);
      state_ = std::move(m);
      break;
    }
    case ClassifierVariant::RandomForest:
      state_ = fit_forest(features, labels, params_.forest);
      break;
    case ClassifierVariant::LinearSvm:
      state_ = fit_svm(features, labels, params_.svm);
      break;
    case ClassifierVariant::GaussianNb:
      state_ = fit_nb(features, labels, params_.nb);
      break;
  }
}

std::vector<int> ClassifierModel::forest_votes(const Matrix& rows) const {
  const ForestModel* f = forest();
  if (f == nullptr) throw std::logic_error("forest_votes: model is not a fitted random forest");
  if (static_cast<std::size_t>(rows.cols()) != input_dim_) {
    throw std::invalid_argument("forest_votes: row width mismatch");
  }
  std::vector<int> votes(static_cast<std::size_t>(rows.rows()), 0);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const double* row = rows.data() + r * rows.cols();
    for (const DecisionTree& t : f->trees) votes[static_cast<std::size_t>(r)] += t.predict(row);
  }
  return votes;
}

Vector ClassifierModel::predict_proba(const Matrix& rows) const {
  if (!fitted()) throw std::logic_error("predict_proba: classifier is not fitted");
  if (static_cast<std::size_t>(rows.cols()) != input_dim_) {
    throw std::invalid_argument("predict_proba: expected " + std::to_string(input_dim_) + " columns, got " +
                                std::to_string(rows.cols()));
  }
  Vector out(rows.rows());
  if (const auto* m = std::get_if<MlpModel>(&state_)) {
    out = m->net.forward(rows).col(0);
  } else if (const auto* f = std::get_if<ForestModel>(&state_)) {
    const std::vector<int> votes = forest_votes(rows);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      out[r] = static_cast<double>(votes[static_cast<std::size_t>(r)]) / static_cast<double>(f->trees.size());
    }
  } else if (const auto* s = std::get_if<SvmModel>(&state_)) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) out[r] = sigmoid(rows.row(r).dot(s->weights) + s->bias);
  } else if (const auto* nb = std::get_if<NbModel>(&state_)) {
    out = predict_nb(*nb, rows);
  }
  return out;
}

nlohmann::json ClassifierModel::to_json() const {
  nlohmann::json j;
  j["variant"] = std::string(to_string(variant_));
  j["input_dim"] = input_dim_;
  j["params"] = {
      {"mlp", {{"hidden", params_.mlp.hidden},
               {"epochs", params_.mlp.train.epochs},
               {"batch_size", params_.mlp.train.batch_size},
               {"learning_rate", params_.mlp.train.learning_rate},
               {"seed", params_.mlp.train.seed}}},
      {"forest", {{"n_trees", params_.forest.n_trees},
                  {"max_depth", params_.forest.max_depth},
                  {"min_samples_split", params_.forest.min_samples_split},
                  {"features_per_split", params_.forest.features_per_split},
                  {"seed", params_.forest.seed}}},
      {"svm", {{"lambda", params_.svm.lambda}, {"epochs", params_.svm.epochs}, {"seed", params_.svm.seed}}},
      {"nb", {{"var_smoothing", params_.nb.var_smoothing}}}};
  if (const auto* m = std::get_if<MlpModel>(&state_)) {
    j["model"] = m->net.to_json();
  } else if (const auto* f = std::get_if<ForestModel>(&state_)) {
    nlohmann::json trees = nlohmann::json::array();
    for (const DecisionTree& t : f->trees) {
      std::vector<int> feature, left, right, vote;
      std::vector<double> threshold;
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        vote.push_back(n.vote);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                       {"vote", vote}});
    }
    j["model"] = {{"trees", trees}};
  } else if (const auto* s = std::get_if<SvmModel>(&state_)) {
    j["model"] = {{"weights", vector_json(s->weights)}, {"bias", s->bias}};
  } else if (const auto* nb = std::get_if<NbModel>(&state_)) {
    j["model"] = {{"mean", {vector_json(nb->mean[0]), vector_json(nb->mean[1])}},
                  {"var", {vector_json(nb->var[0]), vector_json(nb->var[1])}},
                  {"log_prior", {nb->log_prior[0], nb->log_prior[1]}}};
  }
  return j;
}

ClassifierModel ClassifierModel::from_json(const nlohmann::json& j) {
  ClassifierParams p;
  const auto& jp = j.at("params");
  p.mlp.hidden = jp.at("mlp").at("hidden").get<std::vector<std::size_t>>();
  p.mlp.train.epochs = jp.at("mlp").at("epochs").get<int>();
  p.mlp.train.batch_size = jp.at("mlp").at("batch_size").get<int>();
  p.mlp.train.learning_rate = jp.at("mlp").at("learning_rate").get<double>();
  p.mlp.train.seed = jp.at("mlp").at("seed").get<std::uint64_t>();
  p.forest.n_trees = jp.at("forest").at("n_trees").get<int>();
  p.forest.max_depth = jp.at("forest").at("max_depth").get<int>();
  p.forest.min_samples_split = jp.at("forest").at("min_samples_split").get<int>();
  p.forest.features_per_split = jp.at("forest").at("features_per_split").get<int>();
  p.forest.seed = jp.at("forest").at("seed").get<std::uint64_t>();
  p.svm.lambda = jp.at("svm").at("lambda").get<double>();
  p.svm.epochs = jp.at("svm").at("epochs").get<int>();
  p.svm.seed = jp.at("svm").at("seed").get<std::uint64_t>();
  p.nb.var_smoothing = jp.at("nb").at("var_smoothing").get<double>();

  ClassifierModel model(parse_classifier_variant(j.at("variant").get<std::string>()), p);
  model.input_dim_ = j.at("input_dim").get<std::size_t>();
  if (!j.contains("model")) return model;
  const auto& jm = j.at("model");
  switch (model.variant_) {
    case ClassifierVariant::Mlp:
      model.state_ = MlpModel{DenseNet::from_json(jm)};
      break;
    case ClassifierVariant::RandomForest: {
      ForestModel f;
      for (const auto& jt : jm.at("trees")) {
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto vote = jt.at("vote").get<std::vector<int>>();
        DecisionTree t;
        for (std::size_t i = 0; i < feature.size(); ++i) {
          t.nodes.push_back({feature.at(i), threshold.at(i), left.at(i), right.at(i), vote.at(i)});
        }
        f.trees.push_back(std::move(t));
      }
      model.state_ = std::move(f);
      break;
    }
    case ClassifierVariant::LinearSvm:
      model.state_ = SvmModel{vector_from_json(jm.at("weights")), jm.at("bias").get<double>()};
      break;
    case ClassifierVariant::GaussianNb: {
      NbModel nb;
      for (int c = 0; c < 2; ++c) {
        nb.mean[c] = vector_from_json(jm.at("mean").at(static_cast<std::size_t>(c)));
        nb.var[c] = vector_from_json(jm.at("var").at(static_cast<std::size_t>(c)));
        nb.log_prior[c] = jm.at("log_prior").at(static_cast<std::size_t>(c)).get<double>();
      }
      model.state_ = std::move(nb);
      break;
    }
  }
  return model;
}

double detection_rate(const Vector& probabilities, double threshold) {
  if (probabilities.size() == 0) throw std::invalid_argument("detection_rate: no attacks to score");
  const auto detected = (probabilities.array() > threshold).count();
  return static_cast<double>(detected) / static_cast<double>(probabilities.size());
}

double detection_rate(const BatchScorer& scorer, const Matrix& attacks, double threshold) {
  if (attacks.rows() == 0) throw std::invalid_argument("detection_rate: no attacks to score");
  return detection_rate(scorer(attacks), threshold);
}

double detection_rate(const ClassifierModel& model, const Matrix& attacks, double threshold) {
  if (attacks.rows() == 0) throw std::invalid_argument("detection_rate: no attacks to score");
  return detection_rate(model.predict_proba(attacks), threshold);
}

double accuracy(const ClassifierModel& model, const FeatureMatrix& data, double threshold) {
  if (data.rows() == 0) throw std::invalid_argument("accuracy: empty data");
  const Vector p = model.predict_proba(data.features);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const int pred = p[static_cast<Eigen::Index>(r)] > threshold ? 1 : 0;
    correct += pred == (data.labels[r] != 0 ? 1 : 0) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

}  // namespace sigmaforge
