#include <benchmark/benchmark.h>

#include "mainvc/audio/griffin_lim.hpp"
#include "mainvc/audio/mel.hpp"
#include "mainvc/audio/synthetic.hpp"
#include "mainvc/model/srd_network.hpp"
#include "mainvc/random.hpp"
#include "mainvc/tensor/ops.hpp"

using namespace mainvc;

namespace {

Tensor noise(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<Scalar> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Scalar>(rng.normal());
  return Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Conv1dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = noise({c, 128}, 1);
  const auto w = noise({c, c, 5}, 2);
  const auto b = noise({c}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, b, 1, 1, 2));
}
BENCHMARK(BM_Conv1dForward)->Arg(64)->Arg(256);

void BM_Conv1dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = noise({c, 128}, 1, true);
  const auto w = noise({c, c, 5}, 2, true);
  const auto b = noise({c}, 3, true);
  for (auto _ : state) sum(conv1d(x, w, b, 1, 1, 2)).backward();
}
BENCHMARK(BM_Conv1dBackward)->Arg(64)->Arg(256);

void BM_Logmel(benchmark::State& state) {
  const auto wave = audio::synthesize_utterance(audio::make_synthetic_speaker(0, 1), 2,
                                                static_cast<double>(state.range(0)));
  const audio::MelConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(audio::logmel(wave, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(wave.size()));
}
BENCHMARK(BM_Logmel)->Arg(1)->Arg(4);

void BM_GriffinLim(benchmark::State& state) {
  const auto wave = audio::synthesize_utterance(audio::make_synthetic_speaker(1, 1), 3, 1.0);
  const audio::MelConfig cfg;
  const auto mel = audio::logmel(wave, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(audio::griffin_lim(mel, cfg, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_GriffinLim)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const auto cfg = state.range(0) ? ModelConfig::reference() : ModelConfig::small();
  const SrdNetwork model(cfg, 1);
  const auto z = noise({cfg.n_mels, 128}, 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.reconstruct(z, z, std::nullopt));
  state.SetLabel(state.range(0) ? "reference" : "small");
}
BENCHMARK(BM_Reconstruct)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ReconstructBackward(benchmark::State& state) {
  const SrdNetwork model(ModelConfig::small(), 1);
  const auto z = noise({80, 128}, 4);
  for (auto _ : state) sum(model.reconstruct(z, z, 7)).backward();
}
BENCHMARK(BM_ReconstructBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
