#include <omp.h>

#include <random>
#include <vector>

#include "blocks/kernels.hpp"
#include "doctest.h"

namespace k = blocks::kernels;

namespace {

std::vector<double> random_vec(size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Direct definition of a zero-padded strided convolution.
std::vector<double> naive_conv(const k::ConvShape& s, const std::vector<double>& in,
                               const std::vector<double>& w, const std::vector<double>& b) {
  std::vector<double> out(s.output_size());
  const int oh = s.out_height(), ow = s.out_width();
  for (int f = 0; f < s.filters; ++f)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = b[f];
        for (int c = 0; c < s.channels; ++c)
          for (int i = 0; i < s.kernel; ++i)
            for (int j = 0; j < s.kernel; ++j) {
              const int r = y * s.stride - s.pad + i, col = x * s.stride - s.pad + j;
              if (r < 0 || col < 0 || r >= s.height || col >= s.width) continue;
              acc += w[((f * s.channels + c) * s.kernel + i) * s.kernel + j] *
                     in[(c * s.height + r) * s.width + col];
            }
        out[(f * oh + y) * ow + x] = acc;
      }
  return out;
}

const k::ConvShape kShapes[] = {
    {3, 5, 5, 4, 3, 1, 1},
    {6, 9, 7, 5, 3, 2, 0},
    {4, 25, 25, 8, 8, 4, 2},
};

}  // namespace

TEST_CASE("serial convolution matches the direct definition") {
  for (const auto& s : kShapes) {
    const auto in = random_vec(s.input_size(), 1), w = random_vec(s.weight_size(), 2),
               b = random_vec(s.filters, 3);
    std::vector<double> out(s.output_size());
    k::serial::conv2d_forward(s, in, w, b, out);
    const auto ref = naive_conv(s, in, w, b);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("convolution backward is the adjoint of forward") {
  for (const auto& s : kShapes) {
    const auto in = random_vec(s.input_size(), 4), w = random_vec(s.weight_size(), 5),
               dout = random_vec(s.output_size(), 6);
    std::vector<double> zero_b(s.filters, 0.0), out(s.output_size());
    std::vector<double> dw(s.weight_size()), db(s.filters), din(s.input_size());
    k::serial::conv2d_backward(s, in, w, dout, dw, db, din);
    k::serial::conv2d_forward(s, in, w, zero_b, out);
    // <dout, conv(in; w)> is bilinear: equals <din, in> and <dw, w>
    double lhs = 0, by_in = 0, by_w = 0;
    for (size_t i = 0; i < out.size(); ++i) lhs += dout[i] * out[i];
    for (size_t i = 0; i < in.size(); ++i) by_in += din[i] * in[i];
    for (size_t i = 0; i < w.size(); ++i) by_w += dw[i] * w[i];
    CHECK(by_in == doctest::Approx(lhs).epsilon(1e-10));
    CHECK(by_w == doctest::Approx(lhs).epsilon(1e-10));
  }
}

TEST_CASE("OpenMP kernels are bit-identical to the serial reference") {
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    for (const auto& s : kShapes) {
      const auto in = random_vec(s.input_size(), 7), w = random_vec(s.weight_size(), 8),
                 b = random_vec(s.filters, 9), dout = random_vec(s.output_size(), 10);
      std::vector<double> o1(s.output_size()), o2(s.output_size());
      k::serial::conv2d_forward(s, in, w, b, o1);
      k::omp::conv2d_forward(s, in, w, b, o2);
      CHECK(o1 == o2);
      std::vector<double> dw1(s.weight_size()), db1(s.filters), di1(s.input_size());
      std::vector<double> dw2 = dw1, db2 = db1, di2 = di1;
      k::serial::conv2d_backward(s, in, w, dout, dw1, db1, di1);
      k::omp::conv2d_backward(s, in, w, dout, dw2, db2, di2);
      CHECK(dw1 == dw2);
      CHECK(db1 == db2);
      CHECK(di1 == di2);
    }
    for (auto [rows, cols] : {std::pair{7, 5}, std::pair{120, 506}}) {
      const auto w = random_vec(static_cast<size_t>(rows) * cols, 11), b = random_vec(rows, 12),
                 x = random_vec(cols, 13), dy = random_vec(rows, 14);
      std::vector<double> y1(rows), y2(rows);
      k::serial::dense_forward(w, b, x, y1, rows, cols);
      k::omp::dense_forward(w, b, x, y2, rows, cols);
      CHECK(y1 == y2);
      std::vector<double> dw1(w.size()), db1(rows), dx1(cols);
      std::vector<double> dw2 = dw1, db2 = db1, dx2 = dx1;
      k::serial::dense_backward(w, x, dy, dw1, db1, dx1, rows, cols);
      k::omp::dense_backward(w, x, dy, dw2, db2, dx2, rows, cols);
      CHECK(dw1 == dw2);
      CHECK(db1 == db2);
      CHECK(dx1 == dx2);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("dense layer matches the definition") {
  const std::vector<double> w = {1, 2, 3, 4, 5, 6}, b = {0.5, -0.5}, x = {1, 0, -1};
  std::vector<double> y(2);
  k::serial::dense_forward(w, b, x, y, 2, 3);
  CHECK(y[0] == 1 - 3 + 0.5);
  CHECK(y[1] == 4 - 6 - 0.5);
  std::vector<double> dw(6), db(2), dx(3);
  const std::vector<double> dy = {1.0, 2.0};
  k::serial::dense_backward(w, x, dy, dw, db, dx, 2, 3);
  CHECK(dx == std::vector<double>{9, 12, 15});
  CHECK(db == std::vector<double>{1, 2});
  CHECK(dw == std::vector<double>{1, 0, -1, 2, 0, -2});
}
