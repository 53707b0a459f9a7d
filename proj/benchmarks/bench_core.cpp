#include <benchmark/benchmark.h>

#include <memory>
#include <string>
#include <vector>

#include "cat/affinity.hpp"
#include "cat/linalg.hpp"
#include "cat/metrics.hpp"
#include "cat/rng.hpp"
#include "cat/sampling.hpp"

namespace {

cat::ClassSetPtr classes(std::size_t n) {
  std::vector<cat::ClassEntry> e;
  for (std::size_t i = 0; i < n; ++i) e.push_back({static_cast<std::int32_t>(i), "c" + std::to_string(i)});
  return std::make_shared<const cat::ClassSet>("bench", std::move(e));
}

cat::LabelMap random_map(const cat::ClassSetPtr& cs, std::size_t side, cat::Rng& rng) {
  std::vector<std::int32_t> v(side * side);
  for (auto& x : v) x = static_cast<std::int32_t>(rng.below(cs->size()));
  return cat::LabelMap(cs, side, side, std::move(v));
}

cat::Matrix random_matrix(std::size_t r, std::size_t c, cat::Rng& rng) {
  cat::Matrix m(r, c);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

void BM_ConfusionAffinity(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  cat::Rng rng(1);
  const auto tcs = classes(19);
  const auto scs = classes(34);
  std::vector<cat::LabelMap> gt;
  std::vector<cat::LabelMap> pred;
  for (int i = 0; i < 8; ++i) {
    gt.push_back(random_map(tcs, side, rng));
    pred.push_back(random_map(scs, side, rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(cat::confusion_affinity(gt, pred));
  state.SetItemsProcessed(state.iterations() * 8 * static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_ConfusionAffinity)->Arg(64)->Arg(256)->Arg(512);

void BM_SqrtmPsd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  cat::Rng rng(2);
  const cat::Matrix a = random_matrix(n, n, rng);
  const cat::Matrix m = a.transposed() * a;
  for (auto _ : state) benchmark::DoNotOptimize(cat::sqrtm_psd(m));
}
BENCHMARK(BM_SqrtmPsd)->Arg(16)->Arg(64)->Arg(128);

void BM_GreedySelect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  cat::Rng rng(3);
  const auto cs = classes(19);
  std::vector<cat::PoolImage> pool;
  for (std::size_t i = 0; i < n; ++i) pool.push_back({"img" + std::to_string(i), random_map(cs, 32, rng)});
  for (auto _ : state) benchmark::DoNotOptimize(cat::greedy_select(pool, n / 4, 7));
}
BENCHMARK(BM_GreedySelect)->Arg(64)->Arg(256);

void BM_Mmd2Unbiased(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  cat::Rng rng(4);
  const cat::Matrix x = random_matrix(n, 64, rng);
  const cat::Matrix y = random_matrix(n, 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(cat::mmd2_unbiased(x, y));
}
BENCHMARK(BM_Mmd2Unbiased)->Arg(100)->Arg(500);

}  // namespace
BENCHMARK_MAIN();
