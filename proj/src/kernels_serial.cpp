#include <omp.h>

#include <atomic>

#include "blocks/kernels.hpp"

namespace blocks::kernels {

namespace serial {

void dense_forward(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double* wr = w.data() + static_cast<size_t>(i) * cols;
    double acc = b[i];
    for (int j = 0; j < cols; ++j) acc += wr[j] * x[j];
    y[i] = acc;
  }
}

void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw,
                    std::span<double> db, std::span<double> dx, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double g = dy[i];
    db[i] += g;
    double* dwr = dw.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) dwr[j] += g * x[j];
  }
  if (dx.empty()) return;
  for (int i = 0; i < rows; ++i) {
    const double* wr = w.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) dx[j] += wr[j] * dy[i];
  }
}

void conv2d_forward(const ConvShape& s, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  for (int f = 0; f < s.filters; ++f) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b[f];
        for (int c = 0; c < s.channels; ++c) {
          const double* wk = w.data() + ((static_cast<size_t>(f) * s.channels + c) * k) * k;
          const double* plane = in.data() + static_cast<size_t>(c) * s.height * s.width;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s.stride - s.pad + ky;
            if (iy < 0 || iy >= s.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s.stride - s.pad + kx;
              if (ix < 0 || ix >= s.width) continue;
              acc += wk[ky * k + kx] * plane[iy * s.width + ix];
            }
          }
        }
        out[(static_cast<size_t>(f) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void conv2d_backward(const ConvShape& s, std::span<const double> in,
                     std::span<const double> w, std::span<const double> dout,
                     std::span<double> dw, std::span<double> db, std::span<double> din) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  for (int f = 0; f < s.filters; ++f) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = dout[(static_cast<size_t>(f) * oh + oy) * ow + ox];
        db[f] += g;
        for (int c = 0; c < s.channels; ++c) {
          double* dwk = dw.data() + ((static_cast<size_t>(f) * s.channels + c) * k) * k;
          const double* plane = in.data() + static_cast<size_t>(c) * s.height * s.width;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s.stride - s.pad + ky;
            if (iy < 0 || iy >= s.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s.stride - s.pad + kx;
              if (ix < 0 || ix >= s.width) continue;
              dwk[ky * k + kx] += g * plane[iy * s.width + ix];
            }
          }
        }
      }
    }
  }
  if (din.empty()) return;
  for (int f = 0; f < s.filters; ++f) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = dout[(static_cast<size_t>(f) * oh + oy) * ow + ox];
        for (int c = 0; c < s.channels; ++c) {
          const double* wk = w.data() + ((static_cast<size_t>(f) * s.channels + c) * k) * k;
          double* dplane = din.data() + static_cast<size_t>(c) * s.height * s.width;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s.stride - s.pad + ky;
            if (iy < 0 || iy >= s.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s.stride - s.pad + kx;
              if (ix < 0 || ix >= s.width) continue;
              dplane[iy * s.width + ix] += wk[ky * k + kx] * g;
            }
          }
        }
      }
    }
  }
}

}  // namespace serial

namespace {
std::atomic<long> g_threshold{1L << 18};

bool go_parallel(long work) {
  return work >= g_threshold.load(std::memory_order_relaxed) && omp_get_max_threads() > 1;
}
}  // namespace

void set_parallel_threshold(long macs) { g_threshold.store(macs); }
long parallel_threshold() { return g_threshold.load(); }

void dense_forward(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y, int rows, int cols) {
  if (go_parallel(static_cast<long>(rows) * cols))
    omp::dense_forward(w, b, x, y, rows, cols);
  else
    serial::dense_forward(w, b, x, y, rows, cols);
}

void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw,
                    std::span<double> db, std::span<double> dx, int rows, int cols) {
  if (go_parallel(static_cast<long>(rows) * cols))
    omp::dense_backward(w, x, dy, dw, db, dx, rows, cols);
  else
    serial::dense_backward(w, x, dy, dw, db, dx, rows, cols);
}

void conv2d_forward(const ConvShape& s, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  if (go_parallel(s.macs()))
    omp::conv2d_forward(s, in, w, b, out);
  else
    serial::conv2d_forward(s, in, w, b, out);
}

void conv2d_backward(const ConvShape& s, std::span<const double> in,
                     std::span<const double> w, std::span<const double> dout,
                     std::span<double> dw, std::span<double> db, std::span<double> din) {
  if (go_parallel(s.macs()))
    omp::conv2d_backward(s, in, w, dout, dw, db, din);
  else
    serial::conv2d_backward(s, in, w, dout, dw, db, din);
}

}  // namespace blocks::kernels
