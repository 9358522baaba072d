#include "blocks/tensor.hpp"

#include <cmath>

namespace blocks {

size_t element_count(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape_)
    : shape(std::move(shape_)), data(element_count(shape), 0.0) {}

Tensor& ParamSet::add(const std::string& name, std::vector<int> shape) {
  if (contains(name)) throw ShapeError("duplicate tensor '" + name + "'");
  tensors_.emplace_back(name, Tensor(std::move(shape)));
  return tensors_.back().second;
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& [n, t] : tensors_)
    if (n == name) return true;
  return false;
}

Tensor& ParamSet::operator[](const std::string& name) {
  for (auto& [n, t] : tensors_)
    if (n == name) return t;
  throw ShapeError("no tensor named '" + name + "'");
}

const Tensor& ParamSet::operator[](const std::string& name) const {
  for (const auto& [n, t] : tensors_)
    if (n == name) return t;
  throw ShapeError("no tensor named '" + name + "'");
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& [n, t] : tensors_) z.add(n, t.shape);
  return z;
}

void ParamSet::set_zero() {
  for (auto& [n, t] : tensors_) std::fill(t.data.begin(), t.data.end(), 0.0);
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (other.count() != count()) return false;
  for (size_t i = 0; i < count(); ++i)
    if (name(i) != other.name(i) || at(i).shape != other.at(i).shape) return false;
  return true;
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
  if (!same_layout(other)) throw ShapeError("parameter layouts differ");
  for (size_t i = 0; i < count(); ++i) {
    double* dst = at(i).ptr();
    const double* src = other.at(i).ptr();
    for (size_t k = 0; k < at(i).size(); ++k) dst[k] += s * src[k];
  }
}

void ParamSet::scale(double s) {
  for (auto& [n, t] : tensors_)
    for (double& v : t.data) v *= s;
}

double ParamSet::squared_norm() const {
  double total = 0.0;
  for (const auto& [n, t] : tensors_)
    for (double v : t.data) total += v * v;
  return total;
}

bool ParamSet::all_finite() const {
  for (const auto& [n, t] : tensors_)
    for (double v : t.data)
      if (!std::isfinite(v)) return false;
  return true;
}

size_t ParamSet::total_size() const {
  size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

}  // namespace blocks
