#pragma once

#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/random.hpp"
#include "sigmaforge/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace sigmaforge {

/// A candidate attack. Functional columns always equal those of the real
/// attack it was derived from.
struct Solution {
  Vector features;
  std::size_t source_attack_index = 0;
};

struct Population;

struct HybridConfig {
  std::size_t population_size = 30;
  double selection_rate = 0.5;
  double mutation_rate = 1.0;
  int max_generations = 500;
  int patience = 50;
  /// Solutions scoring above this fitness are archived.
  double archive_threshold = 0.5;
  std::uint64_t seed = 0;
  /// Sees the population after initialisation and at every generation boundary.
  std::function<void(const Population&)> on_generation;

  void validate() const;
};

struct Population {
  std::vector<Solution> members;
  std::vector<double> fitness;
  int generation = 0;
  double best_fitness = 0.0;
};

/// Discriminator and classifier scores, each in [0,1]. A null discriminator
/// counts as 0 (nothing flagged as generated).
struct Scorers {
  BatchScorer discriminator;
  BatchScorer classifier;

  /// 1 - max(discriminator, classifier) per row.
  Vector fitness(const Matrix& rows) const;
};

double fitness(double discriminator_score, double classifier_score);

/// Greedy per-feature hill climb: every non-functional feature, in index
/// order, tries current + k * 0.001 for k in [-9, 10] (clamped to [0,1]) and
/// keeps the fittest value; ties keep the smaller |k|, then the lower k.
/// Updates pop.fitness; never lowers any member's fitness.
void local_search(Population& pop, const Scorers& scorers, const FunctionalMask& mask);

/// Indices of the n fittest members, best first; ties favour lower index.
std::vector<std::size_t> select_best(const Population& pop, std::size_t n);

/// First half of the features from a, second half from b; functional columns
/// restored from a. The child keeps a's source attack.
Solution crossover(const Solution& a, const Solution& b, const FunctionalMask& mask);

/// With probability m, nudges one random non-functional feature by
/// uniform(-0.01, 0.01) and clamps it to [0,1].
Solution mutate(const Solution& child, double m, const FunctionalMask& mask, Rng& rng);

struct HybridResult {
  Population population;
  /// Distinct solutions whose fitness exceeded the archive threshold.
  Matrix archive;
  Vector archive_fitness;
  std::vector<std::size_t> archive_sources;
  /// Best fitness after initialisation and after each generation.
  std::vector<double> best_trace;
  int generations = 0;
  bool stopped_by_patience = false;
};

/// Genetic algorithm with a local-search pass before every selection.
HybridResult run_hybrid(const Scorers& scorers, const FunctionalMask& mask, const Matrix& real_attacks,
                        const HybridConfig& cfg);

/// 70 feature columns plus a trailing fitness column.
void write_archive_csv(const std::filesystem::path& path, const HybridResult& result,
                       const std::vector<std::string>& columns);

}  // namespace sigmaforge
