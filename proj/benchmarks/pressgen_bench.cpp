// Copyright (C) 2026 The pressgen Authors
// SPDX-License-Identifier: Apache-2.0

// Microbenchmarks for the hot paths: codebook lookup, the codec's 1-D
// convolution, the Frechet distance, one generator decode step and text
// embedding.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "pressgen/codec.hpp"
#include "pressgen/generator.hpp"
#include "pressgen/metrics.hpp"
#include "pressgen/nn.hpp"
#include "pressgen/random.hpp"
#include "pressgen/text_embedding.hpp"

namespace pressgen {
namespace {

void fill_normal(nn::Matrix& m, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
}

// Args: codebook size K, latent dim D; 30 latent steps per call.
void BM_Quantize(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  Rng rng(1);
  Codebook cb(k, d, 99);
  fill_normal(cb.entries, rng);
  LatentSequence lat;
  lat.vectors.resize(d, 30);
  fill_normal(lat.vectors, rng);
  for (auto _ : state) benchmark::DoNotOptimize(quantize(lat, cb));
  state.SetItemsProcessed(state.iterations() * lat.length());
}
BENCHMARK(BM_Quantize)->Args({128, 32})->Args({512, 64});

// Args: channels in/out, sequence length; kernel 3.
void BM_ConvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int t = static_cast<int>(state.range(1));
  Rng rng(2);
  nn::Conv1d conv("bench", c, c, 3, 1, 1);
  conv.init(rng);
  nn::Matrix x(c, t);
  fill_normal(x, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nullptr));
}
BENCHMARK(BM_ConvForward)->Args({64, 120})->Args({128, 120})->Args({256, 30});

void BM_FrechetDistance(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(3);
  nn::Matrix a(d, 4 * d), b(d, 4 * d);
  fill_normal(a, rng);
  fill_normal(b, rng);
  const GaussianStats sa = gaussian_stats(a.transpose());
  const GaussianStats sb = gaussian_stats(b.transpose());
  for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(sa, sb));
}
BENCHMARK(BM_FrechetDistance)->Arg(32)->Arg(64)->Arg(128);

// Next-token logits for a prefix of range(0) codes (full recompute).
void BM_GeneratorNextToken(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.layers = 2;
  cfg.heads = 4;
  cfg.width = 64;
  cfg.max_len = 32;
  const GeneratorModel model(cfg, 128, 32, 4);
  Rng rng(4);
  std::vector<int> prefix(static_cast<std::size_t>(state.range(0)));
  for (int& tok : prefix) tok = static_cast<int>(rng.below(128));
  std::vector<float> cond(kTextEmbeddingDim);
  for (float& v : cond) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(model.next_token_logits(prefix, cond));
}
BENCHMARK(BM_GeneratorNextToken)->Arg(1)->Arg(15)->Arg(30);

void BM_GeneratorGreedy(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.layers = 2;
  cfg.heads = 4;
  cfg.width = 64;
  cfg.max_len = 32;
  const GeneratorModel model(cfg, 128, 32, 5);
  std::vector<float> cond(kTextEmbeddingDim, 0.01f);
  for (auto _ : state) benchmark::DoNotOptimize(model.generate(cond));
}
BENCHMARK(BM_GeneratorGreedy);

void BM_HashingEmbed(benchmark::State& state) {
  const HashingEmbeddingProvider provider;
  const std::string text = "a person performs a slow sun salutation, stretching both arms overhead";
  for (auto _ : state) benchmark::DoNotOptimize(provider.embed(text));
}
BENCHMARK(BM_HashingEmbed);

}  // namespace
}  // namespace pressgen

BENCHMARK_MAIN();
