#pragma once

// Sampled 2D Gaussian-derivative basis and its analytic steering.
//
// Grid convention: a kernel of odd side `extent` is stored row-major; column
// offset x and row offset y both run over -(extent-1)/2 ... +(extent-1)/2.
// Direction theta means the unit vector (cos theta, sin theta) in (x, y).

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace rsesf {

inline constexpr int kMaxBasisOrder = 2;

/// Derivative orders along theta (i) and theta + pi/2 (j).
struct BasisIndex {
  int i = 0;
  int j = 0;
  bool operator==(const BasisIndex&) const = default;
};

struct BasisSpec {
  int order_i = 0;
  int order_j = 0;
  double theta = 0.0;
  double sigma = 1.0;
  std::size_t extent = 1;

  /// Throws ArgumentError if the spec violates its invariants.
  void validate() const;
};

/// Square, odd-sided sampled kernel.
class KernelGrid {
 public:
  KernelGrid() = default;
  explicit KernelGrid(std::size_t extent);
  KernelGrid(std::size_t extent, std::vector<double> values);

  std::size_t extent() const noexcept { return extent_; }
  int half() const noexcept { return static_cast<int>(extent_ / 2); }

  double& at(std::size_t row, std::size_t col) { return values_[row * extent_ + col]; }
  double at(std::size_t row, std::size_t col) const { return values_[row * extent_ + col]; }
  /// Value at centered offset (x = column offset, y = row offset).
  double at_offset(int x, int y) const {
    return values_[static_cast<std::size_t>(y + half()) * extent_ +
                   static_cast<std::size_t>(x + half())];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double sum() const noexcept;
  double max_abs() const noexcept;
  double l2_norm() const noexcept;
  bool all_finite() const noexcept;

  bool operator==(const KernelGrid&) const = default;

 private:
  std::size_t extent_ = 0;
  std::vector<double> values_;
};

/// g(t) = exp(-t^2 / (2 sigma^2)) / (sigma sqrt(2 pi)) at integer offsets.
std::vector<double> sample_gaussian_1d(double sigma, std::size_t extent);

/// d^order g / dt^order at integer offsets, order in {0, 1, 2}.
std::vector<double> sample_gaussian_derivative_1d(int order, double sigma, std::size_t extent);

/// d/dsigma of sample_gaussian_derivative_1d.
std::vector<double> sample_gaussian_derivative_1d_dsigma(int order, double sigma,
                                                         std::size_t extent);

/// Axis-aligned element G^{i,j}: i-th x-derivative times j-th y-derivative.
KernelGrid sample_axis_aligned(int i, int j, double sigma, std::size_t extent);

/// Basis element of order i along theta and j along theta + pi/2.
KernelGrid steer(int i, int j, double theta, double sigma, std::size_t extent);
KernelGrid steer(const BasisSpec& spec);

/// d/dsigma of steer(i, j, theta, sigma, extent), closed form.
KernelGrid dsigma(int i, int j, double theta, double sigma, std::size_t extent);

/// (0,0),(1,0),(0,1) for N=1, followed by (2,0),(1,1),(0,2) for N=2.
std::vector<BasisIndex> basis_list(int max_order);
std::size_t basis_count(int max_order);

/// One axis-aligned term of a steered element: coefficient * G^{x_order, y_order}.
struct SteeringTerm {
  int x_order = 0;
  int y_order = 0;
  double coefficient = 0.0;
};

/// Expansion of steered element (i, j) at theta into axis-aligned elements.
std::vector<SteeringTerm> steering_terms(int i, int j, double theta);

/// cos/sin that are exact at integer multiples of pi/2.
std::pair<double, double> cos_sin(double theta);

/// Quarter turn consistent with steering: rot90(steer(theta)) == steer(theta + pi/2).
/// out[r][c] = in[n-1-c][r].
KernelGrid rot90(const KernelGrid& grid);

}  // namespace rsesf
