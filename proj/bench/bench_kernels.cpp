// Copyright 2026 The nacasr Authors. All Rights Reserved.
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


// Serial reference kernels against their OpenMP counterparts at shapes taken
// from the TD codec (base 32, one second of audio) and the quantizer.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "nacasr/kernels.hpp"

namespace k = nac::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Args: channels, length.
k::ConvGeometry conv_geometry(const benchmark::State& state) {
  k::ConvGeometry g;
  g.in_channels = g.out_channels = static_cast<std::size_t>(state.range(0));
  g.kernel = 7;
  g.pad_left = g.pad_right = 3;
  g.in_length = static_cast<std::size_t>(state.range(1));
  return g;
}

template <bool Parallel>
void BM_conv1d_forward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vector(g.in_channels * g.in_length, 1);
  const auto w = random_vector(g.out_channels * g.in_channels * g.kernel, 2);
  const auto b = random_vector(g.out_channels, 3);
  std::vector<double> y(g.out_channels * g.out_length());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv1d_forward(g, x, w, b, y);
    } else {
      k::serial::conv1d_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(y.size() * g.in_channels * g.kernel));
}

template <bool Parallel>
void BM_conv1d_backward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const std::size_t out = g.out_length();
  const auto x = random_vector(g.in_channels * g.in_length, 1);
  const auto w = random_vector(g.out_channels * g.in_channels * g.kernel, 2);
  const auto gy = random_vector(g.out_channels * out, 3);
  std::vector<double> gx(x.size()), gw(w.size()), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv1d_backward_input(g, gy, w, gx);
      k::conv1d_backward_weight(g, gy, x, gw, gb);
    } else {
      k::serial::conv1d_backward_input(g, gy, w, gx);
      k::serial::conv1d_backward_weight(g, gy, x, gw, gb);
    }
    benchmark::DoNotOptimize(gx.data());
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_matmul_nt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::matmul_nt(n, n, n, a, b, c);
    } else {
      k::serial::matmul_nt(n, n, n, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

// Arg 0: frames. 128-dim latents against a 1024-entry codebook.
template <bool Parallel>
void BM_nearest_rows(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t dim = 128, size = 1024;
  const auto q = random_vector(frames * dim, 1), book = random_vector(size * dim, 2);
  std::vector<std::int32_t> out(frames);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::nearest_rows(frames, dim, q, size, book, out);
    } else {
      k::serial::nearest_rows(frames, dim, q, size, book, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames * size * dim));
}

}  // namespace

BENCHMARK(BM_conv1d_forward<false>)->Name("conv1d_forward/serial")->Args({32, 16000})->Args({256, 200});
BENCHMARK(BM_conv1d_forward<true>)->Name("conv1d_forward/omp")->Args({32, 16000})->Args({256, 200});
BENCHMARK(BM_conv1d_backward<false>)->Name("conv1d_backward/serial")->Args({32, 16000})->Args({256, 200});
BENCHMARK(BM_conv1d_backward<true>)->Name("conv1d_backward/omp")->Args({32, 16000})->Args({256, 200});
BENCHMARK(BM_matmul_nt<false>)->Name("matmul_nt/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_matmul_nt<true>)->Name("matmul_nt/omp")->Arg(128)->Arg(512);
BENCHMARK(BM_nearest_rows<false>)->Name("nearest_rows/serial")->Arg(80)->Arg(800);
BENCHMARK(BM_nearest_rows<true>)->Name("nearest_rows/omp")->Arg(80)->Arg(800);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
