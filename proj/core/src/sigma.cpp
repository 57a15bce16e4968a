#include "sigmaforge/sigma.hpp"

#include "sigmaforge/random.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sigmaforge {
namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

// First `n` rows of a seeded permutation of the archive, kept in archive order.
Matrix cap_rows(const Matrix& rows, std::size_t n, std::uint64_t seed) {
  if (n == 0 || static_cast<std::size_t>(rows.rows()) <= n) return rows;
  std::vector<std::size_t> idx(static_cast<std::size_t>(rows.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, "archive-cap");
  shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return take_rows(rows, idx);
}

// `n` real train rows; cycles through a shuffled permutation when n exceeds
// the train set.
Matrix sample_real(const Matrix& train, std::size_t n, std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(train.rows());
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, "real-rows");
  shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = perm[i % total];
  return take_rows(train, idx);
}

}  // namespace

std::string_view to_string(Arm arm) {
  switch (arm) {
    case Arm::Sigma:
      return "sigma";
    case Arm::GanOnly:
      return "gan-only";
    case Arm::MetaOnly:
      return "meta-only";
  }
  throw std::invalid_argument("unknown arm");
}

Arm parse_arm(std::string_view text) {
  for (Arm a : kAllArms) {
    if (text == to_string(a)) return a;
  }
  if (text == "gan") return Arm::GanOnly;
  if (text == "meta") return Arm::MetaOnly;
  throw std::invalid_argument("unknown arm '" + std::string(text) + "' (expected sigma, gan-only or meta-only)");
}

Vector ids_score(const CompositeIds& ids, const Matrix& rows) {
  if (!ids.classifier.fitted()) throw std::logic_error("ids_score: classifier is not fitted");
  if (!ids.discriminator_trained) return ids.classifier.predict_proba(rows);

  Vector score = ids.discriminator.predict_proba(rows);
  std::vector<std::size_t> passed;
  for (Eigen::Index r = 0; r < score.size(); ++r) {
    if (score[r] <= 0.5) passed.push_back(static_cast<std::size_t>(r));
  }
  if (!passed.empty()) {
    const Vector c = ids.classifier.predict_proba(take_rows(rows, passed));
    for (std::size_t i = 0; i < passed.size(); ++i) {
      score[static_cast<Eigen::Index>(passed[i])] = c[static_cast<Eigen::Index>(i)];
    }
  }
  return score;
}

BatchScorer ids_scorer(const CompositeIds& ids) {
  return [&ids](const Matrix& rows) { return ids_score(ids, rows); };
}

Scorers ids_fitness_scorers(const CompositeIds& ids) {
  Scorers s;
  s.classifier = [&ids](const Matrix& rows) { return ids.classifier.predict_proba(rows); };
  if (ids.discriminator_trained) {
    s.discriminator = [&ids](const Matrix& rows) { return ids.discriminator.predict_proba(rows); };
  }
  return s;
}

CompositeIds make_composite(ClassifierVariant variant, const ClassifierParams& params, const FeatureMatrix& train,
                            std::uint64_t seed) {
  ClassifierModel clf(variant, params.with_seed(derive_seed(seed, "classifier")));
  clf.fit(train);
  return CompositeIds(ClassifierModel(variant, params.with_seed(derive_seed(seed, "discriminator"))),
                      std::move(clf));
}

bool ConvergenceCounter::update(double score) {
  if (score > previous_score) {
    previous_score = score;
    counter = 0;
  } else {
    counter = std::min(counter + 1, limit);
  }
  return converged();
}

nlohmann::json SigmaState::to_json() const {
  nlohmann::json j;
  j["arm"] = std::string(to_string(arm));
  j["variant"] = std::string(to_string(variant));
  j["iterations"] = iteration;
  j["previous_score"] = previous_score;
  j["counter"] = counter;
  j["converged"] = converged;
  j["hit_cap"] = hit_cap;
  j["converged_at"] = converged_at ? nlohmann::json(*converged_at) : nlohmann::json(nullptr);
  nlohmann::json rs = nlohmann::json::array();
  for (const RoundReport& r : rounds) {
    rs.push_back({{"iteration", r.iteration},
                  {"score", r.gan_score},
                  {"counter", r.counter},
                  {"n_gan_attacks", r.n_gan_attacks},
                  {"n_meta_attacks", r.n_meta_attacks},
                  {"gan_train_loss", r.gan_train_loss},
                  {"gan_noise_size", r.gan_noise_size},
                  {"hybrid_best_fitness", r.hybrid_best_fitness},
                  {"hybrid_generations", r.hybrid_generations}});
  }
  j["rounds"] = std::move(rs);
  return j;
}

void SigmaConfig::validate() const {
  gan.validate();
  hybrid.validate();
  if (fixed_iterations < 0) throw std::invalid_argument("SigmaConfig: fixed_iterations must be >= 0");
  if (max_iterations < 1) throw std::invalid_argument("SigmaConfig: max_iterations must be >= 1");
  if (patience_rounds < 1) throw std::invalid_argument("SigmaConfig: patience_rounds must be >= 1");
}

std::pair<CompositeIds, SigmaState> run_arm(Arm arm, CompositeIds ids, const DatasetSplit& split,
                                            const FunctionalMask& mask, const SigmaConfig& cfg) {
  cfg.validate();
  if (!ids.classifier.fitted()) throw std::logic_error("run_arm: classifier must be fitted first");
  const Matrix train_attacks = split.train.select(1);
  const Matrix test_attacks = split.test.select(1);
  if (train_attacks.rows() == 0 || test_attacks.rows() == 0) {
    throw std::invalid_argument("run_arm: train and test sets both need attack rows");
  }

  SigmaState state;
  state.arm = arm;
  state.variant = ids.classifier.variant();
  ConvergenceCounter counter;
  counter.limit = cfg.patience_rounds;
  const int rounds = cfg.fixed_iterations > 0 ? cfg.fixed_iterations : cfg.max_iterations;

  for (int it = 1; it <= rounds; ++it) {
    const auto round = static_cast<std::uint64_t>(it);
    RoundReport report;
    report.iteration = it;
    report.arm = arm;

    // 1. Generator against the current IDS.
    GanConfig gcfg = cfg.gan;
    gcfg.train.seed = derive_seed(cfg.gan.train.seed, "round", round);
    const BatchScorer black_box = ids_scorer(ids);
    auto [gen, gan_report] = train_generator(black_box, train_attacks, mask, gcfg, &split.train.features);
    report.gan_train_loss = gan_report.best_loss;
    report.gan_noise_size = gan_report.best_noise_size;

    // 2. Score on attacks built from test-set functional features.
    report.gan_score = detection_rate(black_box, generate(gen, test_attacks, derive_seed(cfg.seed, "eval", round)));
    const bool stop = counter.update(report.gan_score);
    report.counter = counter.counter;
    state.iteration = it;
    state.previous_score = counter.previous_score;
    state.counter = counter.counter;
    if (stop && !state.converged_at) state.converged_at = it;
    if (stop && cfg.fixed_iterations == 0) {
      state.converged = true;
      state.rounds.push_back(report);
      break;
    }

    // 3. Hybrid search against the same IDS.
    Matrix archive(0, train_attacks.cols());
    if (arm != Arm::GanOnly) {
      HybridConfig hcfg = cfg.hybrid;
      hcfg.seed = derive_seed(cfg.hybrid.seed, "round", round);
      const HybridResult hybrid = run_hybrid(ids_fitness_scorers(ids), mask, train_attacks, hcfg);
      report.hybrid_best_fitness = hybrid.population.best_fitness;
      report.hybrid_generations = hybrid.generations;
      if (cfg.on_archive) cfg.on_archive(it, hybrid);
      archive = cap_rows(hybrid.archive, cfg.max_archive_rows, derive_seed(cfg.seed, "archive", round));
    }

    // 4. Refit the discriminator from scratch: generated = 1, real = 0.
    Matrix gan_rows(0, train_attacks.cols());
    if (arm != Arm::MetaOnly) gan_rows = generate(gen, train_attacks, derive_seed(cfg.seed, "retrain", round));
    report.n_gan_attacks = static_cast<std::size_t>(gan_rows.rows());
    report.n_meta_attacks = static_cast<std::size_t>(archive.rows());
    const auto n_gen = static_cast<Eigen::Index>(gan_rows.rows() + archive.rows());
    if (n_gen > 0) {
      const Matrix real =
          sample_real(split.train.features, static_cast<std::size_t>(n_gen), derive_seed(cfg.seed, "real", round));
      Matrix x(2 * n_gen, train_attacks.cols());
      x.topRows(gan_rows.rows()) = gan_rows;
      x.middleRows(gan_rows.rows(), archive.rows()) = archive;
      x.bottomRows(n_gen) = real;
      std::vector<int> y(static_cast<std::size_t>(2 * n_gen), 0);
      std::fill(y.begin(), y.begin() + n_gen, 1);
      ClassifierModel disc(ids.discriminator.variant(),
                           ids.discriminator.params().with_seed(derive_seed(cfg.seed, "discriminator", round)));
      disc.fit(x, y);
      ids.discriminator = std::move(disc);
      ids.discriminator_trained = true;
    }
    state.rounds.push_back(report);
  }
  state.converged = state.converged || (cfg.fixed_iterations == 0 && counter.converged());
  state.hit_cap = cfg.fixed_iterations == 0 && !state.converged;
  return {std::move(ids), std::move(state)};
}

std::pair<CompositeIds, SigmaState> sigma_run(CompositeIds ids, const DatasetSplit& split, const FunctionalMask& mask,
                                              const SigmaConfig& cfg) {
  return run_arm(Arm::Sigma, std::move(ids), split, mask, cfg);
}

std::pair<CompositeIds, SigmaState> gan_only_run(CompositeIds ids, const DatasetSplit& split,
                                                 const FunctionalMask& mask, const SigmaConfig& cfg) {
  return run_arm(Arm::GanOnly, std::move(ids), split, mask, cfg);
}

std::pair<CompositeIds, SigmaState> meta_only_run(CompositeIds ids, const DatasetSplit& split,
                                                  const FunctionalMask& mask, const SigmaConfig& cfg) {
  return run_arm(Arm::MetaOnly, std::move(ids), split, mask, cfg);
}

std::vector<ArmComparison> compare_arms(const std::vector<SigmaState>& reports) {
  if (reports.empty()) throw std::invalid_argument("compare_arms: no arm reports");
  std::vector<ArmComparison> table;
  for (const SigmaState& s : reports) {
    ArmComparison row;
    row.arm = s.arm;
    row.variant = s.variant;
    row.iterations = static_cast<int>(s.rounds.size());
    row.converged_at = s.converged_at;
    double sum = 0.0;
    for (const RoundReport& r : s.rounds) {
      sum += r.gan_score;
      if (!row.first_full && r.gan_score >= 1.0) row.first_full = r.iteration;
      if (row.first_full) row.max_drop_after_full = std::max(row.max_drop_after_full, 1.0 - r.gan_score);
    }
    if (!s.rounds.empty()) {
      row.final_score = s.rounds.back().gan_score;
      row.mean_score = sum / static_cast<double>(s.rounds.size());
    }
    table.push_back(row);
  }
  return table;
}

}  // namespace sigmaforge
