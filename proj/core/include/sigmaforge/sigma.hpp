#pragma once

#include "sigmaforge/classifiers.hpp"
#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/ganattack.hpp"
#include "sigmaforge/metaheuristic.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace sigmaforge {

/// Experimental condition: which generated attacks retrain the discriminator.
enum class Arm { Sigma, GanOnly, MetaOnly };

inline constexpr Arm kAllArms[] = {Arm::Sigma, Arm::GanOnly, Arm::MetaOnly};

/// "sigma", "gan-only", "meta-only".
std::string_view to_string(Arm arm);
Arm parse_arm(std::string_view text);

/// Two-stage IDS. Rows the discriminator flags as generated (> 0.5) keep the
/// discriminator's score; the rest are scored by the attack classifier.
/// Until the discriminator is trained, the classifier alone decides.
struct CompositeIds {
  ClassifierModel discriminator;
  ClassifierModel classifier;
  bool discriminator_trained = false;

  CompositeIds(ClassifierModel disc, ClassifierModel clf)
      : discriminator(std::move(disc)), classifier(std::move(clf)) {}
};

Vector ids_score(const CompositeIds& ids, const Matrix& rows);

/// Scorer bound to a snapshot of the IDS.
BatchScorer ids_scorer(const CompositeIds& ids);

/// Discriminator and classifier as separate fitness terms for the hybrid search.
Scorers ids_fitness_scorers(const CompositeIds& ids);

/// Builds an IDS whose classifier and discriminator share one variant. The
/// classifier is fitted on `train`; the discriminator starts untrained.
CompositeIds make_composite(ClassifierVariant variant, const ClassifierParams& params, const FeatureMatrix& train,
                            std::uint64_t seed);

/// Stop rule of the reinforcement loop: the counter resets whenever the
/// score strictly beats the best so far and otherwise increments; the loop
/// stops once it reaches `limit`.
struct ConvergenceCounter {
  double previous_score = 0.0;
  int counter = 0;
  int limit = 3;

  /// Returns true when the loop should stop.
  bool update(double score);
  bool converged() const { return counter >= limit; }
};

struct RoundReport {
  int iteration = 0;
  Arm arm = Arm::Sigma;
  double gan_score = 0.0;
  std::size_t n_gan_attacks = 0;
  std::size_t n_meta_attacks = 0;
  int counter = 0;
  double gan_train_loss = 0.0;
  std::size_t gan_noise_size = 0;
  double hybrid_best_fitness = 0.0;
  int hybrid_generations = 0;
};

struct SigmaState {
  Arm arm = Arm::Sigma;
  ClassifierVariant variant = ClassifierVariant::Mlp;
  int iteration = 0;
  double previous_score = 0.0;
  int counter = 0;
  bool converged = false;
  /// The hard iteration cap ended the run before convergence.
  bool hit_cap = false;
  /// Round at which the counter first reached its limit, if it did.
  std::optional<int> converged_at;
  std::vector<RoundReport> rounds;

  nlohmann::json to_json() const;
};

struct SigmaConfig {
  GanConfig gan;
  HybridConfig hybrid;
  /// > 0: run exactly this many rounds and only record where the counter
  /// would have stopped. 0: stop on the counter (or the cap).
  int fixed_iterations = 0;
  int max_iterations = 25;
  int patience_rounds = 3;
  /// Cap on hybrid-archive rows per retraining round (0 = keep all).
  std::size_t max_archive_rows = 0;
  std::uint64_t seed = 0;
  /// Called with every round's hybrid result before the archive is capped.
  std::function<void(int iteration, const HybridResult&)> on_archive;

  void validate() const;
};

/// One reinforcement loop. `ids.classifier` must already be fitted on
/// split.train and is never modified.
std::pair<CompositeIds, SigmaState> run_arm(Arm arm, CompositeIds ids, const DatasetSplit& split,
                                            const FunctionalMask& mask, const SigmaConfig& cfg);

std::pair<CompositeIds, SigmaState> sigma_run(CompositeIds ids, const DatasetSplit& split, const FunctionalMask& mask,
                                              const SigmaConfig& cfg);
std::pair<CompositeIds, SigmaState> gan_only_run(CompositeIds ids, const DatasetSplit& split,
                                                 const FunctionalMask& mask, const SigmaConfig& cfg);
std::pair<CompositeIds, SigmaState> meta_only_run(CompositeIds ids, const DatasetSplit& split,
                                                  const FunctionalMask& mask, const SigmaConfig& cfg);

struct ArmComparison {
  Arm arm = Arm::Sigma;
  ClassifierVariant variant = ClassifierVariant::Mlp;
  int iterations = 0;
  /// First round with every generated attack detected.
  std::optional<int> first_full;
  double final_score = 0.0;
  double mean_score = 0.0;
  /// Largest fall below 1.0 after first_full (0 when never reached).
  double max_drop_after_full = 0.0;
  std::optional<int> converged_at;
};

std::vector<ArmComparison> compare_arms(const std::vector<SigmaState>& reports);

}  // namespace sigmaforge
