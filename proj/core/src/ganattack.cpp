#include "sigmaforge/ganattack.hpp"

#include "sigmaforge/classifiers.hpp"
#include "sigmaforge/parallel.hpp"
#include "sigmaforge/random.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

namespace sigmaforge {
namespace {

void overwrite_mask(Matrix& rows, const Matrix& sources, const FunctionalMask& mask) {
  for (std::size_t c : mask.indices) {
    rows.col(static_cast<Eigen::Index>(c)) = sources.col(static_cast<Eigen::Index>(c));
  }
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx, std::size_t start, std::size_t len) {
  Matrix out(static_cast<Eigen::Index>(len), m.cols());
  for (std::size_t r = 0; r < len; ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[start + r]));
  }
  return out;
}

Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

struct CandidateResult {
  std::optional<Generator> best;
  double best_loss = 2.0;
  std::vector<double> epoch_trace;
};

CandidateResult train_candidate(const BatchScorer& black_box, const Matrix& attacks, const Matrix& reference,
                                const FunctionalMask& mask, const GanConfig& cfg, int attempt,
                                std::size_t noise_size) {
  const std::uint64_t seed = derive_seed(cfg.train.seed, "gan", static_cast<std::uint64_t>(attempt), noise_size);
  Generator gen = make_generator(noise_size, mask, static_cast<std::size_t>(attacks.cols()), cfg.hidden, seed);
  AdamState adam = AdamState::for_net(gen.net);

  const auto n = static_cast<std::size_t>(attacks.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.train.batch_size);

  CandidateResult result;
  std::optional<DenseNet> surrogate;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    // Refit the surrogate on what the generator currently produces plus real traffic.
    TrainConfig scfg = cfg.surrogate;
    scfg.seed = derive_seed(seed, "surrogate", e);
    if (surrogate) scfg.epochs = cfg.surrogate_refit_epochs;
    const Matrix probes = stack(generate(gen, attacks, derive_seed(seed, "probe", e)), reference);
    surrogate = surrogate_fit(black_box, probes, scfg, surrogate ? &*surrogate : nullptr).net;

    Rng rng = make_rng(seed, "batches", e);
    shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      const Matrix real = gather_rows(attacks, order, start, len);
      const Matrix inputs = generator_inputs(gen, real, derive_seed(seed, "noise", e, start));
      Matrix rows = gen.net.forward_train(inputs);
      overwrite_mask(rows, real, mask);
      rows = rows.cwiseMax(0.0).cwiseMin(1.0);

      const double loss = black_box(rows).mean();
      epoch_sum += loss;
      ++epoch_batches;
      if (loss <= result.best_loss) {
        Generator snapshot = gen;
        snapshot.net.clear_cache();
        result.best = std::move(snapshot);
        result.best_loss = loss;
      }

      // d mean(surrogate(rows)) / d rows, with functional columns frozen.
      const Matrix s = surrogate->forward_train(rows);
      Matrix grad_rows = surrogate->backward(Matrix::Constant(s.rows(), 1, 1.0 / static_cast<double>(len))).input;
      for (std::size_t c : mask.indices) grad_rows.col(static_cast<Eigen::Index>(c)).setZero();
      adam_step(gen.net, gen.net.backward(grad_rows), adam, cfg.train.learning_rate);
      if (!gen.net.all_finite()) throw std::runtime_error("train_generator: non-finite generator weights");
    }
    result.epoch_trace.push_back(epoch_sum / static_cast<double>(epoch_batches));
  }
  return result;
}

}  // namespace

nlohmann::json Generator::to_json() const {
  nlohmann::json j = net.to_json();
  j["noise_size"] = noise_size;
  j["mask_group"] = std::string(to_string(mask.group));
  j["mask_indices"] = mask.indices;
  return j;
}

Generator Generator::from_json(const nlohmann::json& j) {
  Generator g;
  g.net = DenseNet::from_json(j);
  g.noise_size = j.at("noise_size").get<std::size_t>();
  g.mask.group = parse_attack_group(j.at("mask_group").get<std::string>());
  g.mask.indices = j.at("mask_indices").get<std::vector<std::size_t>>();
  std::sort(g.mask.indices.begin(), g.mask.indices.end());
  if (g.net.input_dim() != g.noise_size + g.mask.indices.size()) {
    throw std::invalid_argument("Generator JSON: input dim != noise_size + mask size");
  }
  return g;
}

void GanConfig::validate() const {
  train.validate();
  surrogate.validate();
  if (attempts < 1) throw std::invalid_argument("GanConfig: attempts must be >= 1");
  if (max_noise_size < 1) throw std::invalid_argument("GanConfig: max_noise_size must be >= 1");
  if (surrogate_refit_epochs < 1) throw std::invalid_argument("GanConfig: surrogate_refit_epochs must be >= 1");
}

Generator make_generator(std::size_t noise_size, const FunctionalMask& mask, std::size_t output_dim,
                         const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  if (noise_size < 1) throw std::invalid_argument("make_generator: noise_size must be >= 1");
  for (std::size_t c : mask.indices) {
    if (c >= output_dim) throw std::invalid_argument("make_generator: mask index out of range");
  }
  std::vector<std::size_t> dims{noise_size + mask.indices.size()};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  std::vector<Activation> acts(hidden.size(), Activation::LeakyRelu);
  acts.push_back(Activation::Sigmoid);
  Generator g;
  g.net = init_net(dims, acts, seed);
  g.noise_size = noise_size;
  g.mask = mask;
  return g;
}

Matrix generator_inputs(const Generator& gen, const Matrix& real_attacks, std::uint64_t seed) {
  if (static_cast<std::size_t>(real_attacks.cols()) != gen.output_dim()) {
    throw std::invalid_argument("generate: source rows have " + std::to_string(real_attacks.cols()) +
                                " columns, generator emits " + std::to_string(gen.output_dim()));
  }
  const auto k = static_cast<Eigen::Index>(gen.noise_size);
  Matrix in(real_attacks.rows(), k + static_cast<Eigen::Index>(gen.mask.indices.size()));
  Rng rng = make_rng(seed, "noise");
  for (Eigen::Index r = 0; r < real_attacks.rows(); ++r) {
    for (Eigen::Index c = 0; c < k; ++c) in(r, c) = uniform01(rng);
    Eigen::Index c = k;
    for (std::size_t m : gen.mask.indices) in(r, c++) = real_attacks(r, static_cast<Eigen::Index>(m));
  }
  return in;
}

Matrix generate(const Generator& gen, const Matrix& real_attacks, std::uint64_t seed) {
  if (real_attacks.rows() == 0) throw std::invalid_argument("generate: no source attacks");
  Matrix rows = gen.net.forward(generator_inputs(gen, real_attacks, seed));
  overwrite_mask(rows, real_attacks, gen.mask);
  return rows.cwiseMax(0.0).cwiseMin(1.0);
}

SurrogateFit surrogate_fit(const BatchScorer& black_box, const Matrix& probe_rows, const TrainConfig& cfg,
                           const DenseNet* warm_start) {
  if (probe_rows.rows() < 64) throw std::invalid_argument("surrogate_fit: need at least 64 probe rows");
  const Matrix target = black_box(probe_rows);
  SurrogateFit fit;
  fit.net = warm_start != nullptr
                ? *warm_start
                : init_net({static_cast<std::size_t>(probe_rows.cols()), 32, 1},
                           {Activation::LeakyRelu, Activation::Sigmoid}, derive_seed(cfg.seed, "surrogate-init"));
  train_l1(fit.net, probe_rows, target, cfg);
  fit.mad = l1_loss(fit.net.forward(probe_rows), target);
  return fit;
}

std::pair<Generator, GanTrainReport> train_generator(const BatchScorer& black_box, const Matrix& train_attacks,
                                                     const FunctionalMask& mask, const GanConfig& cfg,
                                                     const Matrix* reference_rows) {
  cfg.validate();
  if (train_attacks.rows() == 0) throw std::invalid_argument("train_generator: no training attacks");

  Matrix reference = reference_rows != nullptr ? *reference_rows : train_attacks;
  if (cfg.max_reference_rows > 0 && static_cast<std::size_t>(reference.rows()) > cfg.max_reference_rows) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(reference.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(cfg.train.seed, "reference");
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.max_reference_rows);
    std::sort(idx.begin(), idx.end());
    reference = gather_rows(reference, idx, 0, idx.size());
  }

  const std::size_t per_attempt = cfg.max_noise_size;
  const std::size_t total = static_cast<std::size_t>(cfg.attempts) * per_attempt;
  std::vector<CandidateResult> results(total);
  parallel_for(total, [&](std::size_t i) {
    const int attempt = static_cast<int>(i / per_attempt) + 1;
    const std::size_t noise = i % per_attempt + 1;
    results[i] = train_candidate(black_box, train_attacks, reference, mask, cfg, attempt, noise);
  });

  // Lowest loss wins; ties go to the smaller noise size, then the earlier attempt.
  std::size_t best = 0;
  for (std::size_t i = 1; i < total; ++i) {
    const auto& a = results[i];
    const auto& b = results[best];
    const std::size_t na = i % per_attempt;
    const std::size_t nb = best % per_attempt;
    if (a.best_loss < b.best_loss || (a.best_loss == b.best_loss && na < nb)) best = i;
  }

  GanTrainReport report;
  report.attempts = static_cast<int>(total);
  report.best_attempt = static_cast<int>(best / per_attempt) + 1;
  report.best_noise_size = best % per_attempt + 1;
  report.best_loss = results[best].best_loss;
  report.epoch_trace = results[best].epoch_trace;
  for (const auto& r : results) report.candidate_best.push_back(r.best_loss);
  return {std::move(*results[best].best), std::move(report)};
}

double evasion_rate(const BatchScorer& black_box, const Generator& gen, const Matrix& test_attacks,
                    std::uint64_t seed) {
  if (test_attacks.rows() == 0) throw std::invalid_argument("evasion_rate: no test attacks");
  return detection_rate(black_box, generate(gen, test_attacks, seed));
}

}  // namespace sigmaforge
