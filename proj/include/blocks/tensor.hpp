#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "blocks/env.hpp"

namespace blocks {

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Dense row-major float64 tensor.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_);

  size_t size() const { return data.size(); }
  int dim(int i) const { return shape.at(i); }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

size_t element_count(const std::vector<int>& shape);

// Named tensors in a fixed order; used for parameters, gradients, and moments.
class ParamSet {
 public:
  Tensor& add(const std::string& name, std::vector<int> shape);
  Tensor& operator[](const std::string& name);
  const Tensor& operator[](const std::string& name) const;
  bool contains(const std::string& name) const;

  size_t count() const { return tensors_.size(); }
  const std::string& name(size_t i) const { return tensors_[i].first; }
  Tensor& at(size_t i) { return tensors_[i].second; }
  const Tensor& at(size_t i) const { return tensors_[i].second; }

  ParamSet zeros_like() const;
  void set_zero();
  // this += scale * other; shapes must match
  void add_scaled(const ParamSet& other, double scale);
  void scale(double s);
  double squared_norm() const;
  bool all_finite() const;
  size_t total_size() const;
  bool same_layout(const ParamSet& other) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

}  // namespace blocks
