// Serial reference kernels against their OpenMP counterparts, at the desk and
// full-scale layer sizes.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "blocks/kernels.hpp"

namespace k = blocks::kernels;

namespace {

std::vector<double> random_vec(size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

k::ConvShape conv_shape(int which) {
  // 0: desk (15 stacked planes on 5x5), 1: first full-scale layer (100 planes on 25x25)
  if (which == 0) return {15, 5, 5, 8, 3, 1, 1};
  return {100, 25, 25, 32, 8, 4, 2};
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto s = conv_shape(static_cast<int>(state.range(0)));
  const auto in = random_vec(s.input_size(), 1);
  const auto w = random_vec(s.weight_size(), 2);
  const auto b = random_vec(s.filters, 3);
  std::vector<double> out(s.output_size());
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::conv2d_forward(s, in, w, b, out);
    else k::serial::conv2d_forward(s, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * s.macs());
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto s = conv_shape(static_cast<int>(state.range(0)));
  const auto in = random_vec(s.input_size(), 1);
  const auto w = random_vec(s.weight_size(), 2);
  const auto dout = random_vec(s.output_size(), 3);
  std::vector<double> dw(s.weight_size()), db(s.filters), din(s.input_size());
  for (auto _ : state) {
    if constexpr (Parallel) k::omp::conv2d_backward(s, in, w, dout, dw, db, din);
    else k::serial::conv2d_backward(s, in, w, dout, dw, db, din);
    benchmark::DoNotOptimize(din.data());
  }
  state.SetItemsProcessed(state.iterations() * s.macs());
}

template <bool Parallel>
void BM_Dense(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const int cols = static_cast<int>(state.range(1));
  const auto w = random_vec(static_cast<size_t>(rows) * cols, 1);
  const auto b = random_vec(rows, 2);
  const auto x = random_vec(cols, 3);
  const auto dy = random_vec(rows, 4);
  std::vector<double> y(rows), dw(w.size()), db(rows), dx(cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::omp::dense_forward(w, b, x, y, rows, cols);
      k::omp::dense_backward(w, x, dy, dw, db, dx, rows, cols);
    } else {
      k::serial::dense_forward(w, b, x, y, rows, cols);
      k::serial::dense_backward(w, x, dy, dw, db, dx, rows, cols);
    }
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetItemsProcessed(state.iterations() * rows * cols);
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Arg(0)->Arg(1);
BENCHMARK(BM_ConvForward<true>)->Arg(0)->Arg(1);
BENCHMARK(BM_ConvBackward<false>)->Arg(0)->Arg(1);
BENCHMARK(BM_ConvBackward<true>)->Arg(0)->Arg(1);
BENCHMARK(BM_Dense<false>)->Args({64, 80})->Args({120, 506})->Args({1000, 250});
BENCHMARK(BM_Dense<true>)->Args({64, 80})->Args({120, 506})->Args({1000, 250});

BENCHMARK_MAIN();
