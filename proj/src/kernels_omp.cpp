#include "blocks/kernels.hpp"

namespace blocks::kernels::omp {

void dense_forward(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y, int rows, int cols) {
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const double g = dy[i];
    db[i] += g;
    double* dwr = dw.data() + static_cast<size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) dwr[j] += g * x[j];
  }
  if (dx.empty()) return;
  // Column-wise gather; same addition order per element as the serial scatter.
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) {
    double acc = dx[j];
    for (int i = 0; i < rows; ++i) acc += w[static_cast<size_t>(i) * cols + j] * dy[i];
    dx[j] = acc;
  }
}

void conv2d_forward(const ConvShape& s, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out) {
  const int oh = s.out_height(), ow = s.out_width(), k = s.kernel;
#pragma omp parallel for collapse(2) schedule(static)
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
#pragma omp parallel for schedule(static)
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
  // Gather per input element, visiting (f, oy, ox) in the serial order.
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < s.channels; ++c) {
    for (int iy = 0; iy < s.height; ++iy) {
      for (int ix = 0; ix < s.width; ++ix) {
        double acc = din[(static_cast<size_t>(c) * s.height + iy) * s.width + ix];
        for (int f = 0; f < s.filters; ++f) {
          const double* wk = w.data() + ((static_cast<size_t>(f) * s.channels + c) * k) * k;
          for (int oy = 0; oy < oh; ++oy) {
            const int ky = iy + s.pad - oy * s.stride;
            if (ky < 0 || ky >= k) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int kx = ix + s.pad - ox * s.stride;
              if (kx < 0 || kx >= k) continue;
              acc += wk[ky * k + kx] * dout[(static_cast<size_t>(f) * oh + oy) * ow + ox];
            }
          }
        }
        din[(static_cast<size_t>(c) * s.height + iy) * s.width + ix] = acc;
      }
    }
  }
}

}  // namespace blocks::kernels::omp
