// Copyright 2026 The hamtl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// OpenMP kernels against the serial reference routes.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hamtl/kernels.hpp"
#include "hamtl/layers.hpp"

namespace {

using namespace hamtl;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

layers::SequenceLayout full_layout(std::size_t batch, std::size_t steps) {
  layers::SequenceLayout l{batch, steps, {}};
  for (std::size_t b = 0; b < batch; ++b) l.lengths.push_back(steps - b % (steps / 2));
  return l;
}

template <bool kReference>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (kReference) {
      kernels::reference::gemm(false, false, n, n, n, {a.data(), n}, {b.data(), n}, {c.data(), n}, false);
    } else {
      kernels::gemm(false, false, n, n, n, {a.data(), n}, {b.data(), n}, {c.data(), n}, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool kReference>
void BM_Gru(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  const auto layout = full_layout(8, 50);
  ag::Tensor x = ag::Tensor::from({layout.rows(), 2 * hidden}, random_values(layout.rows() * 2 * hidden, 4), true);
  auto params = layers::make_gru_params(2 * hidden, hidden, rng);
  for (auto _ : state) {
    ag::Tensor out = kReference ? layers::reference::gru_sequence(x, layout, params, false)
                                : layers::gru_sequence(x, layout, params, false);
    ag::backward(ag::sum(out));
    benchmark::DoNotOptimize(out.values().data());
  }
}

template <bool kReference>
void BM_Attention(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  const auto layout = full_layout(8, 50);
  ag::Tensor h = ag::Tensor::from({layout.rows(), d}, random_values(layout.rows() * d, 6), true);
  auto params = layers::make_attention_params(d, 4, rng);
  for (auto _ : state) {
    ag::Tensor out = kReference ? layers::reference::multi_head_attention(h, layout, params)
                                : layers::multi_head_attention(h, layout, params);
    ag::backward(ag::sum(out));
    benchmark::DoNotOptimize(out.values().data());
  }
}

BENCHMARK(BM_Gemm<false>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_Gru<false>)->Name("gru_fwd_bwd/parallel")->Arg(32)->Arg(128);
BENCHMARK(BM_Gru<true>)->Name("gru_fwd_bwd/reference")->Arg(32)->Arg(128);
BENCHMARK(BM_Attention<false>)->Name("attention_fwd_bwd/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Attention<true>)->Name("attention_fwd_bwd/reference")->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
