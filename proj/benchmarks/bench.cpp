#include <benchmark/benchmark.h>

#include "acr/audio.hpp"
#include "acr/refiner.hpp"

namespace {

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  acr::CounterRng rng(1);
  auto a = acr::tensor(n, n);
  auto b = acr::tensor(n, n);
  for (auto& x : a->data) x = rng.normal();
  for (auto& x : b->data) x = rng.normal();
  for (auto _ : state) {
    auto c = acr::matmul(nullptr, a, b);
    benchmark::DoNotOptimize(c->data.data());
  }
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_EmbedSingleAudio(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  acr::RefinerConfig cfg;
  auto params = acr::init_refiner(cfg, 3);
  acr::CounterRng rng(2);
  auto seq = acr::tensor(n, cfg.d_model);
  for (auto& x : seq->data) x = rng.normal();
  for (auto _ : state) {
    auto r = acr::embed_single(seq, acr::Modality::kAudio, params);
    benchmark::DoNotOptimize(r.vec->data.data());
  }
}
BENCHMARK(BM_EmbedSingleAudio)->Arg(8)->Arg(64)->Arg(512);

void BM_ToyEncode(benchmark::State& state) {
  auto noise = acr::white_noise(160000, 16000, 5);
  for (auto _ : state) {
    auto v = acr::toy_encode(noise, 17, 64);
    benchmark::DoNotOptimize(v.data());
  }
}
BENCHMARK(BM_ToyEncode);

}  // namespace

BENCHMARK_MAIN();
