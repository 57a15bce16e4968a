#pragma once

#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/neuralnet.hpp"
#include "sigmaforge/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <utility>
#include <vector>

namespace sigmaforge {

/// Maps noise plus the functional features of a real attack to a full
/// feature vector. Functional columns of the output are copied from the
/// source attack.
struct Generator {
  DenseNet net;
  std::size_t noise_size = 0;
  FunctionalMask mask;

  std::size_t output_dim() const { return net.output_dim(); }

  /// Neural-net JSON plus {"noise_size", "mask_group", "mask_indices"}.
  nlohmann::json to_json() const;
  static Generator from_json(const nlohmann::json& j);
};

struct GanConfig {
  /// Generator optimisation: epochs, batch size, learning rate, master seed.
  TrainConfig train{30, 64, 0.01, 0};
  int attempts = 5;
  std::size_t max_noise_size = 10;
  std::vector<std::size_t> hidden = {128, 96};
  /// First surrogate fit of every candidate.
  TrainConfig surrogate{30, 64, 0.01, 0};
  /// Warm-started surrogate refit at the start of each later generator epoch.
  int surrogate_refit_epochs = 3;
  /// Cap on real reference rows mixed into each surrogate refit (0 = all).
  std::size_t max_reference_rows = 0;

  void validate() const;
};

struct GanTrainReport {
  std::size_t best_noise_size = 0;
  int best_attempt = 0;
  /// Lowest black-box mean score over every scored batch of every candidate.
  double best_loss = 1.0;
  /// Number of generators trained.
  int attempts = 0;
  /// Mean black-box score per epoch of the winning candidate.
  std::vector<double> epoch_trace;
  /// Best batch score of each (attempt, noise_size) candidate, attempt-major.
  std::vector<double> candidate_best;
};

struct SurrogateFit {
  DenseNet net;
  /// Mean absolute deviation from the black box on the probe rows.
  double mad = 0.0;
};

Generator make_generator(std::size_t noise_size, const FunctionalMask& mask, std::size_t output_dim,
                         const std::vector<std::size_t>& hidden, std::uint64_t seed);

/// Builds generator inputs [noise | functional features of each source row].
Matrix generator_inputs(const Generator& gen, const Matrix& real_attacks, std::uint64_t seed);

/// One generated attack per source row. Noise is uniform in [0,1).
Matrix generate(const Generator& gen, const Matrix& real_attacks, std::uint64_t seed);

/// Regresses black-box scores on probe_rows with a 70 -> 32 -> 1 sigmoid net.
/// warm_start, when given, replaces the random initialisation.
SurrogateFit surrogate_fit(const BatchScorer& black_box, const Matrix& probe_rows,
                           const TrainConfig& cfg = {30, 64, 0.01, 0}, const DenseNet* warm_start = nullptr);

/// Sweeps attempts x noise sizes, training each generator against the black
/// box through a per-epoch surrogate, and returns the generator whose scored
/// batch reached the lowest black-box mean. reference_rows (real traffic,
/// defaults to train_attacks) are mixed into every surrogate fit.
std::pair<Generator, GanTrainReport> train_generator(const BatchScorer& black_box, const Matrix& train_attacks,
                                                     const FunctionalMask& mask, const GanConfig& cfg,
                                                     const Matrix* reference_rows = nullptr);

/// Detection rate of the black box on attacks generated from test_attacks.
double evasion_rate(const BatchScorer& black_box, const Generator& gen, const Matrix& test_attacks,
                    std::uint64_t seed);

}  // namespace sigmaforge
