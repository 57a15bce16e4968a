#include "sigmaforge/metaheuristic.hpp"

#include "sigmaforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace sigmaforge {
namespace {

constexpr int kStepLo = -9;
constexpr int kStepHi = 10;
constexpr double kStep = 0.001;
constexpr double kMutationSpan = 0.01;

struct FeatureLess {
  bool operator()(const Vector& a, const Vector& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

// Hill-climbs one solution in place and returns its final fitness.
double climb(Vector& x, double current, const Scorers& scorers, const std::vector<std::size_t>& free) {
  constexpr int kCandidates = kStepHi - kStepLo + 1;
  Matrix batch(kCandidates, x.size());
  for (std::size_t c : free) {
    const auto col = static_cast<Eigen::Index>(c);
    const double base = x[col];
    for (int k = kStepLo; k <= kStepHi; ++k) {
      const Eigen::Index r = k - kStepLo;
      batch.row(r) = x.transpose();
      batch(r, col) = std::clamp(base + k * kStep, 0.0, 1.0);
    }
    const Vector f = scorers.fitness(batch);
    int best_k = 0;
    double best_f = current;
    for (int k = kStepLo; k <= kStepHi; ++k) {
      const double fk = f[k - kStepLo];
      if (fk > best_f || (fk == best_f && std::abs(k) < std::abs(best_k))) {
        best_f = fk;
        best_k = k;
      }
    }
    x[col] = std::clamp(base + best_k * kStep, 0.0, 1.0);
    current = best_f;
  }
  return current;
}

}  // namespace

void HybridConfig::validate() const {
  if (population_size < 2) throw std::invalid_argument("HybridConfig: population_size must be >= 2");
  if (!(selection_rate > 0.0 && selection_rate < 1.0)) {
    throw std::invalid_argument("HybridConfig: selection_rate must lie in (0,1)");
  }
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw std::invalid_argument("HybridConfig: mutation_rate must lie in [0,1]");
  }
  if (max_generations < 1) throw std::invalid_argument("HybridConfig: max_generations must be >= 1");
  if (patience < 1) throw std::invalid_argument("HybridConfig: patience must be >= 1");
}

double fitness(double discriminator_score, double classifier_score) {
  return 1.0 - std::max(discriminator_score, classifier_score);
}

Vector Scorers::fitness(const Matrix& rows) const {
  Vector worst = classifier(rows);
  if (discriminator) worst = worst.cwiseMax(discriminator(rows));
  return (1.0 - worst.array()).matrix();
}

void local_search(Population& pop, const Scorers& scorers, const FunctionalMask& mask) {
  if (pop.members.empty()) throw std::invalid_argument("local_search: empty population");
  const auto dim = static_cast<std::size_t>(pop.members.front().features.size());
  if (pop.fitness.size() != pop.members.size()) {
    pop.fitness.resize(pop.members.size());
    for (std::size_t i = 0; i < pop.members.size(); ++i) {
      pop.fitness[i] = scorers.fitness(pop.members[i].features.transpose())[0];
    }
  }
  const std::vector<std::size_t> free = mask.free_indices(dim);
  parallel_for(pop.members.size(), [&](std::size_t i) {
    pop.fitness[i] = climb(pop.members[i].features, pop.fitness[i], scorers, free);
  });
  pop.best_fitness = *std::max_element(pop.fitness.begin(), pop.fitness.end());
}

std::vector<std::size_t> select_best(const Population& pop, std::size_t n) {
  if (n < 1 || n > pop.members.size()) {
    throw std::invalid_argument("select_best: n must lie in [1, population size]");
  }
  if (pop.fitness.size() != pop.members.size()) throw std::invalid_argument("select_best: fitness not evaluated");
  std::vector<std::size_t> idx(pop.members.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return pop.fitness[a] > pop.fitness[b]; });
  idx.resize(n);
  return idx;
}

Solution crossover(const Solution& a, const Solution& b, const FunctionalMask& mask) {
  if (a.features.size() != b.features.size()) throw std::invalid_argument("crossover: parent widths differ");
  const Eigen::Index dim = a.features.size();
  for (std::size_t c : mask.indices) {
    if (c >= static_cast<std::size_t>(dim)) throw std::invalid_argument("crossover: mask does not fit parents");
  }
  const Eigen::Index half = dim / 2;
  Solution child;
  child.source_attack_index = a.source_attack_index;
  child.features.resize(dim);
  child.features.head(half) = a.features.head(half);
  child.features.tail(dim - half) = b.features.tail(dim - half);
  for (std::size_t c : mask.indices) {
    child.features[static_cast<Eigen::Index>(c)] = a.features[static_cast<Eigen::Index>(c)];
  }
  return child;
}

Solution mutate(const Solution& child, double m, const FunctionalMask& mask, Rng& rng) {
  if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("mutate: rate must lie in [0,1]");
  Solution out = child;
  if (uniform01(rng) >= m) return out;
  const std::vector<std::size_t> free = mask.free_indices(static_cast<std::size_t>(child.features.size()));
  if (free.empty()) return out;
  const auto col = static_cast<Eigen::Index>(free[uniform_index(rng, free.size())]);
  out.features[col] = std::clamp(out.features[col] + uniform(rng, -kMutationSpan, kMutationSpan), 0.0, 1.0);
  return out;
}

HybridResult run_hybrid(const Scorers& scorers, const FunctionalMask& mask, const Matrix& real_attacks,
                        const HybridConfig& cfg) {
  cfg.validate();
  if (real_attacks.rows() == 0) throw std::invalid_argument("run_hybrid: no real attacks");
  const Eigen::Index dim = real_attacks.cols();
  Rng rng = make_rng(cfg.seed, "hybrid");

  HybridResult result;
  Population& pop = result.population;
  pop.members.resize(cfg.population_size);
  Matrix init(static_cast<Eigen::Index>(cfg.population_size), dim);
  for (std::size_t i = 0; i < cfg.population_size; ++i) {
    Solution& s = pop.members[i];
    s.source_attack_index = uniform_index(rng, static_cast<std::size_t>(real_attacks.rows()));
    s.features.resize(dim);
    for (Eigen::Index c = 0; c < dim; ++c) s.features[c] = uniform01(rng);
    for (std::size_t c : mask.indices) {
      s.features[static_cast<Eigen::Index>(c)] =
          real_attacks(static_cast<Eigen::Index>(s.source_attack_index), static_cast<Eigen::Index>(c));
    }
    init.row(static_cast<Eigen::Index>(i)) = s.features.transpose();
  }
  const Vector f0 = scorers.fitness(init);
  pop.fitness.assign(f0.data(), f0.data() + f0.size());
  pop.best_fitness = *std::max_element(pop.fitness.begin(), pop.fitness.end());
  result.best_trace.push_back(pop.best_fitness);
  if (cfg.on_generation) cfg.on_generation(pop);

  std::set<Vector, FeatureLess> seen;
  std::vector<Vector> archived;
  std::vector<double> archived_fitness;
  auto archive = [&](const Solution& s, double f) {
    if (f > cfg.archive_threshold && seen.insert(s.features).second) {
      archived.push_back(s.features);
      archived_fitness.push_back(f);
      result.archive_sources.push_back(s.source_attack_index);
    }
  };

  const auto n_parents = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(cfg.population_size) * cfg.selection_rate)), 1,
      cfg.population_size - 1);
  int stale = 0;
  double best = pop.best_fitness;
  for (int gen = 1; gen <= cfg.max_generations; ++gen) {
    local_search(pop, scorers, mask);
    for (std::size_t i = 0; i < pop.members.size(); ++i) archive(pop.members[i], pop.fitness[i]);

    const std::vector<std::size_t> parents = select_best(pop, n_parents);
    Population next;
    next.generation = gen;
    for (std::size_t p : parents) {
      next.members.push_back(pop.members[p]);
      next.fitness.push_back(pop.fitness[p]);
    }
    const std::size_t n_children = cfg.population_size - n_parents;
    Matrix kids(static_cast<Eigen::Index>(n_children), dim);
    std::vector<Solution> children;
    children.reserve(n_children);
    for (std::size_t j = 0; j < n_children; ++j) {
      // Distinct pair unless only one parent survives selection.
      const std::size_t ia = uniform_index(rng, parents.size());
      std::size_t ib = ia;
      if (parents.size() > 1) {
        ib = uniform_index(rng, parents.size() - 1);
        if (ib >= ia) ++ib;
      }
      Solution child = crossover(pop.members[parents[ia]], pop.members[parents[ib]], mask);
      child = mutate(child, cfg.mutation_rate, mask, rng);
      kids.row(static_cast<Eigen::Index>(j)) = child.features.transpose();
      children.push_back(std::move(child));
    }
    const Vector fk = scorers.fitness(kids);
    for (std::size_t j = 0; j < n_children; ++j) {
      archive(children[j], fk[static_cast<Eigen::Index>(j)]);
      next.members.push_back(std::move(children[j]));
      next.fitness.push_back(fk[static_cast<Eigen::Index>(j)]);
    }
    next.best_fitness = *std::max_element(next.fitness.begin(), next.fitness.end());
    pop = std::move(next);
    result.best_trace.push_back(pop.best_fitness);
    result.generations = gen;
    if (cfg.on_generation) cfg.on_generation(pop);

    if (pop.best_fitness > best) {
      best = pop.best_fitness;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.stopped_by_patience = true;
      break;
    }
  }

  result.archive.resize(static_cast<Eigen::Index>(archived.size()), dim);
  result.archive_fitness.resize(static_cast<Eigen::Index>(archived.size()));
  for (std::size_t i = 0; i < archived.size(); ++i) {
    result.archive.row(static_cast<Eigen::Index>(i)) = archived[i].transpose();
    result.archive_fitness[static_cast<Eigen::Index>(i)] = archived_fitness[i];
  }
  return result;
}

void write_archive_csv(const std::filesystem::path& path, const HybridResult& result,
                       const std::vector<std::string>& columns) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (Eigen::Index c = 0; c < result.archive.cols(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    out << (i < columns.size() ? columns[i] : "f" + std::to_string(c)) << ',';
  }
  out << "fitness\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < result.archive.rows(); ++r) {
    for (Eigen::Index c = 0; c < result.archive.cols(); ++c) out << result.archive(r, c) << ',';
    out << result.archive_fitness[r] << '\n';
  }
}

}  // namespace sigmaforge
