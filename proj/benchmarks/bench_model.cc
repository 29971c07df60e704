#include <benchmark/benchmark.h>

#include "kdvqa/checkpoint.h"
#include "kdvqa/losses.h"

namespace {

kdvqa::EncoderConfig encoder_config() {
  kdvqa::EncoderConfig cfg;
  cfg.vocab_size = 500;
  return cfg;
}

void BM_EncodeSequence(benchmark::State& state) {
  const auto cfg = encoder_config();
  const auto params = kdvqa::init_parameters(kdvqa::encoder_parameter_specs(cfg), 1);
  const kdvqa::Encoder encoder(cfg, params);
  kdvqa::TokenSequence ids;
  for (int i = 0; i < state.range(0); ++i) ids.ids.push_back(5 + i % 400);
  kdvqa::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(encoder.encode_sequence(ids, nullptr).data().data());
}
BENCHMARK(BM_EncodeSequence)->Arg(16)->Arg(64);

void BM_MatcherStep(benchmark::State& state) {
  kdvqa::MatcherConfig cfg;
  const auto params = kdvqa::init_parameters(kdvqa::matcher_parameter_specs(cfg), 2);
  const kdvqa::Matcher matcher(cfg, params);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto rois = kdvqa::Tensor::full({n, 64}, 0.1f);
  const auto memory = kdvqa::Tensor::full({16, 64}, 0.2f);
  std::vector<kdvqa::Real> targets(n, 0);
  targets[0] = 1;
  for (auto _ : state) {
    kdvqa::bce_with_logits(matcher.forward(rois, memory, nullptr), targets).backward();
  }
}
BENCHMARK(BM_MatcherStep)->Arg(10)->Arg(64);

}  // namespace
