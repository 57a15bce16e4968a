#include "sigmaforge/classifiers.hpp"
#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/metaheuristic.hpp"
#include "sigmaforge/neuralnet.hpp"

#include <benchmark/benchmark.h>

namespace sigmaforge {
namespace {

const FeatureMatrix& bench_data() {
  static const FeatureMatrix d = synth_dataset(AttackGroup::Dos, 400, 3.0, 1);
  return d;
}

void BM_ForwardClassifierMlp(benchmark::State& state) {
  const DenseNet net = init_net({70, 64, 32, 1}, {Activation::LeakyRelu, Activation::LeakyRelu, Activation::Sigmoid}, 3);
  const Matrix batch = bench_data().features.topRows(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardClassifierMlp)->Arg(1)->Arg(64)->Arg(800);

void BM_ForwardBackwardGenerator(benchmark::State& state) {
  DenseNet net = init_net({17, 128, 96, 70}, {Activation::LeakyRelu, Activation::LeakyRelu, Activation::Sigmoid}, 4);
  const Matrix batch = Matrix::Constant(64, 17, 0.5);
  const Matrix grad = Matrix::Constant(64, 70, 1.0 / 64.0);
  for (auto _ : state) {
    net.forward_train(batch);
    benchmark::DoNotOptimize(net.backward(grad));
  }
}
BENCHMARK(BM_ForwardBackwardGenerator);

void BM_ForestPredict(benchmark::State& state) {
  ClassifierModel rf(ClassifierVariant::RandomForest);
  rf.fit(bench_data());
  const Matrix batch = bench_data().features.topRows(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rf.predict_proba(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForestPredict)->Arg(20)->Arg(800);

void BM_LocalSearchPass(benchmark::State& state) {
  ClassifierModel nb(ClassifierVariant::GaussianNb);
  nb.fit(bench_data());
  const Scorers scorers{nullptr, [&](const Matrix& rows) { return nb.predict_proba(rows); }};
  const FunctionalMask mask = functional_mask_for(AttackGroup::Dos, bench_data().columns);
  Population start;
  const Matrix attacks = bench_data().select(1);
  for (Eigen::Index r = 0; r < 30; ++r) start.members.push_back(Solution{attacks.row(r).transpose(), static_cast<std::size_t>(r)});
  for (auto _ : state) {
    Population pop = start;
    local_search(pop, scorers, mask);
    benchmark::DoNotOptimize(pop.best_fitness);
  }
}
BENCHMARK(BM_LocalSearchPass)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace sigmaforge

BENCHMARK_MAIN();
