#pragma once

#include <span>

namespace blocks::kernels {

// Geometry of a 2-D convolution over a (channels, height, width) input with
// (filters, channels, k, k) weights and zero padding.
struct ConvShape {
  int channels = 0, height = 0, width = 0;
  int filters = 0, kernel = 0, stride = 1, pad = 0;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  long input_size() const { return static_cast<long>(channels) * height * width; }
  long output_size() const { return static_cast<long>(filters) * out_height() * out_width(); }
  long weight_size() const { return static_cast<long>(filters) * channels * kernel * kernel; }
  long macs() const { return output_size() * channels * kernel * kernel; }
};

// Every kernel exists twice: serial:: is the reference, omp:: splits the
// outermost independent loop across threads. Each output element is summed in
// the same order by both, so results are bit-identical.
#define BLOCKS_KERNEL_DECLS                                                       \
  /* y = W x + b, W is (rows, cols) */                                            \
  void dense_forward(std::span<const double> w, std::span<const double> b,        \
                     std::span<const double> x, std::span<double> y, int rows,    \
                     int cols);                                                   \
  /* dW += dy x^T, db += dy, dx += W^T dy (dx may be empty) */                    \
  void dense_backward(std::span<const double> w, std::span<const double> x,       \
                      std::span<const double> dy, std::span<double> dw,           \
                      std::span<double> db, std::span<double> dx, int rows,       \
                      int cols);                                                  \
  void conv2d_forward(const ConvShape& s, std::span<const double> in,             \
                      std::span<const double> w, std::span<const double> b,       \
                      std::span<double> out);                                     \
  /* accumulates dW, db and (when non-empty) din */                               \
  void conv2d_backward(const ConvShape& s, std::span<const double> in,            \
                       std::span<const double> w, std::span<const double> dout,   \
                       std::span<double> dw, std::span<double> db,                \
                       std::span<double> din);

namespace serial {
BLOCKS_KERNEL_DECLS
}
namespace omp {
BLOCKS_KERNEL_DECLS
}

#undef BLOCKS_KERNEL_DECLS

// Dispatching entry points: the OpenMP variant above a work threshold when
// more than one thread is available, the serial one otherwise.
void dense_forward(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> y, int rows, int cols);
void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw,
                    std::span<double> db, std::span<double> dx, int rows, int cols);
void conv2d_forward(const ConvShape& s, std::span<const double> in,
                    std::span<const double> w, std::span<const double> b,
                    std::span<double> out);
void conv2d_backward(const ConvShape& s, std::span<const double> in,
                     std::span<const double> w, std::span<const double> dout,
                     std::span<double> dw, std::span<double> db, std::span<double> din);

void set_parallel_threshold(long macs);
long parallel_threshold();

}  // namespace blocks::kernels
