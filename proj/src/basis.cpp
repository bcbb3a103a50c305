#include "rsesf/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rsesf/error.hpp"

namespace rsesf {
namespace {

void check_sigma_extent(double sigma, std::size_t extent) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ArgumentError("sigma must be positive and finite, got " + std::to_string(sigma));
  }
  if (extent == 0 || extent % 2 == 0) {
    throw ArgumentError("extent must be odd and positive, got " + std::to_string(extent));
  }
}

void check_orders(int i, int j) {
  if (i < 0 || j < 0 || i + j > kMaxBasisOrder) {
    throw ArgumentError("unsupported basis order (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
  }
}

KernelGrid outer(const std::vector<double>& along_y, const std::vector<double>& along_x) {
  const std::size_t n = along_x.size();
  KernelGrid grid(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) grid.at(r, c) = along_y[r] * along_x[c];
  }
  return grid;
}

// Accumulates coefficient * (y-factor outer x-factor) into `out`.
void add_outer(KernelGrid& out, double coefficient, const std::vector<double>& along_y,
               const std::vector<double>& along_x) {
  const std::size_t n = along_x.size();
  for (std::size_t r = 0; r < n; ++r) {
    const double row_scale = coefficient * along_y[r];
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) += row_scale * along_x[c];
  }
}

}  // namespace

void BasisSpec::validate() const {
  check_orders(order_i, order_j);
  check_sigma_extent(sigma, extent);
  if (!(theta >= 0.0 && theta < 2.0 * std::numbers::pi)) {
    throw ArgumentError("BasisSpec theta must lie in [0, 2 pi)");
  }
}

KernelGrid::KernelGrid(std::size_t extent) : extent_(extent), values_(extent * extent, 0.0) {
  if (extent % 2 == 0) throw ArgumentError("kernel extent must be odd");
}

KernelGrid::KernelGrid(std::size_t extent, std::vector<double> values)
    : extent_(extent), values_(std::move(values)) {
  if (extent % 2 == 0) throw ArgumentError("kernel extent must be odd");
  if (values_.size() != extent_ * extent_) throw ShapeError("kernel grid must be square");
}

double KernelGrid::sum() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

double KernelGrid::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double KernelGrid::l2_norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

bool KernelGrid::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> sample_gaussian_1d(double sigma, std::size_t extent) {
  check_sigma_extent(sigma, extent);
  const int half = static_cast<int>(extent / 2);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out(extent);
  for (int t = -half; t <= half; ++t) {
    const double td = t;
    out[static_cast<std::size_t>(t + half)] = norm * std::exp(-td * td / (2.0 * sigma * sigma));
  }
  return out;
}

std::vector<double> sample_gaussian_derivative_1d(int order, double sigma, std::size_t extent) {
  if (order < 0 || order > kMaxBasisOrder) {
    throw ArgumentError("unsupported derivative order " + std::to_string(order));
  }
  auto g = sample_gaussian_1d(sigma, extent);
  if (order == 0) return g;
  const int half = static_cast<int>(extent / 2);
  const double s2 = sigma * sigma;
  for (int t = -half; t <= half; ++t) {
    const double td = t;
    auto& v = g[static_cast<std::size_t>(t + half)];
    v *= order == 1 ? -td / s2 : (td * td - s2) / (s2 * s2);
  }
  return g;
}

std::vector<double> sample_gaussian_derivative_1d_dsigma(int order, double sigma,
                                                         std::size_t extent) {
  if (order < 0 || order > kMaxBasisOrder) {
    throw ArgumentError("unsupported derivative order " + std::to_string(order));
  }
  const auto g = sample_gaussian_1d(sigma, extent);
  const int half = static_cast<int>(extent / 2);
  const double s2 = sigma * sigma;
  const double s3 = s2 * sigma;
  std::vector<double> out(extent);
  for (int t = -half; t <= half; ++t) {
    const auto idx = static_cast<std::size_t>(t + half);
    const double td = t;
    const double q = td * td - s2;
    const double dg = g[idx] * q / s3;
    switch (order) {
      case 0:
        out[idx] = dg;
        break;
      case 1:
        out[idx] = 2.0 * td / s3 * g[idx] - td / s2 * dg;
        break;
      default:
        out[idx] = (-2.0 / s3 - 4.0 * q / (s3 * s2)) * g[idx] + q / (s2 * s2) * dg;
        break;
    }
  }
  return out;
}

KernelGrid sample_axis_aligned(int i, int j, double sigma, std::size_t extent) {
  check_orders(i, j);
  return outer(sample_gaussian_derivative_1d(j, sigma, extent),
               sample_gaussian_derivative_1d(i, sigma, extent));
}

std::pair<double, double> cos_sin(double theta) {
  const double quarters = theta / (std::numbers::pi / 2.0);
  const double nearest = std::round(quarters);
  if (std::abs(quarters - nearest) < 1e-14) {
    const long k = static_cast<long>(nearest);
    switch (((k % 4) + 4) % 4) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  return {std::cos(theta), std::sin(theta)};
}

std::vector<SteeringTerm> steering_terms(int i, int j, double theta) {
  check_orders(i, j);
  const auto [c, s] = cos_sin(theta);
  switch (i * 3 + j) {
    case 0:  // (0,0)
      return {{0, 0, 1.0}};
    case 3:  // (1,0): d/du, u = (c, s)
      return {{1, 0, c}, {0, 1, s}};
    case 1:  // (0,1): d/dv, v = (-s, c)
      return {{1, 0, -s}, {0, 1, c}};
    case 6:  // (2,0)
      return {{2, 0, c * c}, {1, 1, 2.0 * c * s}, {0, 2, s * s}};
    case 2:  // (0,2)
      return {{2, 0, s * s}, {1, 1, -2.0 * c * s}, {0, 2, c * c}};
    default:  // (1,1): d/du d/dv
      return {{2, 0, -c * s}, {1, 1, c * c - s * s}, {0, 2, c * s}};
  }
}

KernelGrid steer(int i, int j, double theta, double sigma, std::size_t extent) {
  const auto terms = steering_terms(i, j, theta);
  check_sigma_extent(sigma, extent);
  std::vector<double> factors[kMaxBasisOrder + 1];
  for (int o = 0; o <= kMaxBasisOrder; ++o) factors[o] = sample_gaussian_derivative_1d(o, sigma, extent);
  KernelGrid out(extent);
  for (const auto& term : terms) {
    add_outer(out, term.coefficient, factors[term.y_order], factors[term.x_order]);
  }
  return out;
}

KernelGrid steer(const BasisSpec& spec) {
  spec.validate();
  return steer(spec.order_i, spec.order_j, spec.theta, spec.sigma, spec.extent);
}

KernelGrid dsigma(int i, int j, double theta, double sigma, std::size_t extent) {
  const auto terms = steering_terms(i, j, theta);
  check_sigma_extent(sigma, extent);
  std::vector<double> f[kMaxBasisOrder + 1];
  std::vector<double> df[kMaxBasisOrder + 1];
  for (int o = 0; o <= kMaxBasisOrder; ++o) {
    f[o] = sample_gaussian_derivative_1d(o, sigma, extent);
    df[o] = sample_gaussian_derivative_1d_dsigma(o, sigma, extent);
  }
  KernelGrid out(extent);
  for (const auto& term : terms) {
    add_outer(out, term.coefficient, df[term.y_order], f[term.x_order]);
    add_outer(out, term.coefficient, f[term.y_order], df[term.x_order]);
  }
  return out;
}

std::vector<BasisIndex> basis_list(int max_order) {
  if (max_order != 1 && max_order != 2) {
    throw ArgumentError("basis order must be 1 or 2, got " + std::to_string(max_order));
  }
  std::vector<BasisIndex> out{{0, 0}, {1, 0}, {0, 1}};
  if (max_order == 2) out.insert(out.end(), {{2, 0}, {1, 1}, {0, 2}});
  return out;
}

std::size_t basis_count(int max_order) { return basis_list(max_order).size(); }

KernelGrid rot90(const KernelGrid& grid) {
  const std::size_t n = grid.extent();
  KernelGrid out(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = grid.at(n - 1 - c, r);
  }
  return out;
}

}  // namespace rsesf
