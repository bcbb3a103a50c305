#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace rsesf {

/// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& operator[](std::size_t flat) noexcept { return values_[flat]; }
  double operator[](std::size_t flat) const noexcept { return values_[flat]; }

  template <class... I>
  double& operator()(I... idx) {
    return values_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... I>
  double operator()(I... idx) const {
    return values_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Contiguous block obtained by fixing the leading indices.
  std::span<double> slab(std::initializer_list<std::size_t> leading);
  std::span<const double> slab(std::initializer_list<std::size_t> leading) const;

  void fill(double value);
  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;
  std::size_t stride_after(std::size_t count) const;

  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

/// Max absolute elementwise difference; throws on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// ||a - b||_2 / ||b||_2 (returns ||a - b|| when b is zero).
double relative_l2(const Tensor& a, const Tensor& b);

}  // namespace rsesf
