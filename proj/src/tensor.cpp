#include "rsesf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rsesf/error.hpp"

namespace rsesf {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("tensor value count " + std::to_string(values_.size()) +
                     " does not match shape");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range");
  return shape_[axis];
}

std::size_t Tensor::stride_after(std::size_t count) const {
  std::size_t stride = 1;
  for (std::size_t a = count; a < shape_.size(); ++a) stride *= shape_[a];
  return stride;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : idx) {
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat * stride_after(axis);
}

std::span<double> Tensor::slab(std::initializer_list<std::size_t> leading) {
  if (leading.size() > shape_.size()) throw ShapeError("too many slab indices");
  return std::span<double>(values_).subspan(offset(leading), stride_after(leading.size()));
}

std::span<const double> Tensor::slab(std::initializer_list<std::size_t> leading) const {
  if (leading.size() > shape_.size()) throw ShapeError("too many slab indices");
  return std::span<const double>(values_).subspan(offset(leading),
                                                  stride_after(leading.size()));
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double relative_l2(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("relative_l2: shape mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace rsesf
