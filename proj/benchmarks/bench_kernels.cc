#include <benchmark/benchmark.h>

#include "kdvqa/ops.h"

namespace {

kdvqa::Tensor random_tensor(kdvqa::Shape shape, std::uint64_t seed) {
  kdvqa::Rng rng(seed);
  std::vector<kdvqa::Real> v(kdvqa::shape_numel(shape));
  for (auto& x : v) x = static_cast<kdvqa::Real>(rng.normal());
  return kdvqa::Tensor(std::move(shape), std::move(v), true);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  kdvqa::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(kdvqa::matmul(a, b).data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    kdvqa::sum(kdvqa::matmul(a, b)).backward();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_SoftmaxLayerNorm(benchmark::State& state) {
  const auto x = random_tensor({64, 64}, 3);
  kdvqa::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(kdvqa::layer_norm(kdvqa::softmax(x, 1), 1).data().data());
}
BENCHMARK(BM_SoftmaxLayerNorm);

}  // namespace
