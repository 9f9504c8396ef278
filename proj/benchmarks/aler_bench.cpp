#include <random>

#include <benchmark/benchmark.h>

#include "aler/ann_index.hpp"
#include "aler/features.hpp"
#include "aler/mlp.hpp"
#include "aler/synthetic.hpp"

namespace {

using namespace aler;

EmbeddingMatrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  EmbeddingMatrix m(dim);
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0;
    for (auto& x : v) {
      x = normal(rng);
      norm += double(x) * x;
    }
    for (auto& x : v) x = static_cast<float>(x / std::sqrt(norm));
    m.add("v" + std::to_string(i), v);
  }
  return m;
}

void BM_HnswBuild(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 1);
  for (auto _ : state) benchmark::DoNotOptimize(HnswIndex::build(m, {}, 1));
}
BENCHMARK(BM_HnswBuild)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_HnswQuery(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 1);
  const auto index = HnswIndex::build(m, {}, 1);
  const auto probes = random_matrix(256, 64, 2);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(index.query(probes.row(i++ % probes.size()), 10));
}
BENCHMARK(BM_HnswQuery)->Arg(10000)->Arg(50000);

void BM_BruteForceKnn(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 1);
  const auto probes = random_matrix(256, 64, 2);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_knn(m, probes.row(i++ % probes.size()), 10));
}
BENCHMARK(BM_BruteForceKnn)->Arg(10000);

void BM_JaroWinkler(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(jaro_winkler("Sony Cyber-shot DSC-W55 Digital Camera", "sony cybershot dscw55 camera"));
  }
}
BENCHMARK(BM_JaroWinkler);

void BM_InteractionVector(benchmark::State& state) {
  const auto m = random_matrix(2, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(interaction_vector(m.row(std::size_t{0}), m.row(std::size_t{1})));
}
BENCHMARK(BM_InteractionVector)->Arg(64)->Arg(384);

void BM_MlpPredict(benchmark::State& state) {
  const auto rows = static_cast<Eigen::Index>(state.range(0));
  const auto model = MlpModel::initialize(256, 0.2, 1);
  const FeatureMatrix x = FeatureMatrix::Random(rows, 256);
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(model, x));
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_MlpPredict)->Arg(1)->Arg(4096);

void BM_MlpTrain(benchmark::State& state) {
  const auto model_dim = 256;
  const FeatureMatrix x = FeatureMatrix::Random(1000, model_dim);
  std::vector<int> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(static_cast<Eigen::Index>(i), 0) > 0;
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train(x, y, cfg));
}
BENCHMARK(BM_MlpTrain)->Unit(benchmark::kMillisecond);

void BM_SurrogateEncode(benchmark::State& state) {
  const SurrogateEncoder encoder(64);
  for (auto _ : state) benchmark::DoNotOptimize(encoder.encode("Garmin Forerunner 305 GPS sport watch FR305"));
}
BENCHMARK(BM_SurrogateEncode);

}  // namespace

BENCHMARK_MAIN();
