#include "rsesf/filterbank.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rsesf/error.hpp"

namespace rsesf {

ScaleGroupSpec::ScaleGroupSpec(double upper, double lower, double logit)
    : upper_(upper), lower_(lower), logit_(logit) {
  if (!(upper > lower && lower > 0.0) || !std::isfinite(upper)) {
    throw ArgumentError("scale group needs upper > lower > 0, got (" + std::to_string(lower) +
                        ", " + std::to_string(upper) + ")");
  }
}

double ScaleGroupSpec::sigma() const noexcept {
  const double s = 0.5 * (upper_ - lower_) * std::tanh(logit_) + 0.5 * (upper_ + lower_);
  // tanh saturates to +-1 in double precision; keep sigma strictly inside.
  if (s >= upper_) return std::nextafter(upper_, lower_);
  if (s <= lower_) return std::nextafter(lower_, upper_);
  return s;
}

double ScaleGroupSpec::dsigma_dlogit() const noexcept {
  const double t = std::tanh(logit_);
  return 0.5 * (upper_ - lower_) * (1.0 - t * t);
}

double sigma_of(const ScaleGroupSpec& group) { return group.sigma(); }

std::vector<ScaleGroupSpec> make_scale_groups(std::span<const double> edges) {
  if (edges.size() < 2) throw ArgumentError("scale edges need at least two values");
  std::vector<ScaleGroupSpec> groups;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) groups.emplace_back(edges[k + 1], edges[k]);
  validate_scale_groups(groups);
  return groups;
}

void validate_scale_groups(std::span<const ScaleGroupSpec> groups) {
  if (groups.empty()) throw ArgumentError("a layer needs at least one scale group");
  for (std::size_t k = 1; k < groups.size(); ++k) {
    if (groups[k].lower() != groups[k - 1].upper() || !(groups[k].upper() > groups[k - 1].upper())) {
      throw ArgumentError("scale group " + std::to_string(k) +
                          " is not contiguous with the previous group");
    }
  }
}

double RotationScheme::angle(std::size_t index) const {
  if (count == 0 || index >= count) throw ArgumentError("rotation index out of range");
  // (r / R) first so r == R yields exactly 2 pi for every R.
  return 2.0 * std::numbers::pi * (static_cast<double>(index + 1) / static_cast<double>(count));
}

std::vector<double> RotationScheme::angles() const {
  std::vector<double> out(count);
  for (std::size_t r = 0; r < count; ++r) out[r] = angle(r);
  return out;
}

std::size_t kernel_extent(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("kernel_extent: sigma must be positive");
  // 2.5 * 1.2 and friends land a hair above an integer in binary.
  const double half = std::ceil(2.5 * sigma - 1e-9);
  return 2 * static_cast<std::size_t>(half) + 1;
}

std::size_t FilterBank::extent(std::size_t group, ExtentPolicy policy) const {
  const auto& g = scale_groups.at(group);
  return kernel_extent(policy == ExtentPolicy::upper_bound ? g.upper() : g.sigma());
}

void FilterBank::validate() const {
  if (alpha.rank() != 3 || alpha.dim(0) != c_out || alpha.dim(1) != c_in ||
      alpha.dim(2) != basis_count(order)) {
    throw ShapeError("filter bank alpha must be [c_out, c_in, B]");
  }
  validate_scale_groups(scale_groups);
  if (rotation.count == 0) throw ArgumentError("rotation count must be >= 1");
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

FilterBank make_filter_bank(int layer_index, std::size_t c_out, std::size_t c_in, int order,
                            std::vector<ScaleGroupSpec> groups, RotationScheme rotation,
                            std::mt19937_64& rng) {
  const auto basis = basis_list(order);
  const std::size_t b = basis.size();
  FilterBank bank{layer_index, c_out, c_in, order, Tensor({c_out, c_in, b}), std::move(groups),
                  rotation};
  bank.validate();

  const auto& ref = bank.scale_groups[bank.gamma() / 2];
  const std::size_t ref_extent = kernel_extent(ref.upper());
  std::vector<double> inv_norm(b);
  for (std::size_t idx = 0; idx < b; ++idx) {
    inv_norm[idx] = 1.0 / steer(basis[idx].i, basis[idx].j, 0.0, ref.midpoint(), ref_extent).l2_norm();
  }
  const double half_width = 1.0 / std::sqrt(static_cast<double>(c_in * b));
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t i = 0; i < c_in; ++i) {
      for (std::size_t idx = 0; idx < b; ++idx) {
        bank.alpha(o, i, idx) = (2.0 * uniform01(rng) - 1.0) * half_width * inv_norm[idx];
      }
    }
  }
  return bank;
}

std::vector<KernelGrid> steered_basis(const FilterBank& bank, std::size_t group,
                                      std::size_t rotation_index, ExtentPolicy policy) {
  const auto basis = basis_list(bank.order);
  const double sigma = bank.scale_groups.at(group).sigma();
  const std::size_t ext = bank.extent(group, policy);
  const double theta = bank.rotation.angle(rotation_index);
  std::vector<KernelGrid> out;
  out.reserve(basis.size());
  for (const auto& e : basis) out.push_back(steer(e.i, e.j, theta, sigma, ext));
  return out;
}

std::vector<KernelGrid> steered_basis_dsigma(const FilterBank& bank, std::size_t group,
                                             std::size_t rotation_index) {
  const auto basis = basis_list(bank.order);
  const double sigma = bank.scale_groups.at(group).sigma();
  const std::size_t ext = bank.extent(group);
  const double theta = bank.rotation.angle(rotation_index);
  std::vector<KernelGrid> out;
  out.reserve(basis.size());
  for (const auto& e : basis) out.push_back(dsigma(e.i, e.j, theta, sigma, ext));
  return out;
}

namespace {

// values[o, i, r] = sum_b alpha[o, i, b] * grids_per_rotation[r][b]
Tensor combine(const FilterBank& bank, const std::vector<std::vector<KernelGrid>>& grids,
               std::size_t ext) {
  const std::size_t rots = grids.size();
  const std::size_t area = ext * ext;
  Tensor values({bank.c_out, bank.c_in, rots, ext, ext});
  for (std::size_t o = 0; o < bank.c_out; ++o) {
    for (std::size_t i = 0; i < bank.c_in; ++i) {
      const auto coeffs = bank.alpha.slab({o, i});
      for (std::size_t r = 0; r < rots; ++r) {
        auto dst = values.slab({o, i, r});
        for (std::size_t b = 0; b < coeffs.size(); ++b) {
          const auto src = grids[r][b].values();
          for (std::size_t p = 0; p < area; ++p) dst[p] += coeffs[b] * src[p];
        }
      }
    }
  }
  return values;
}

}  // namespace

FilterTensor materialize(const FilterBank& bank, std::size_t group, ExtentPolicy policy) {
  if (group >= bank.gamma()) throw ArgumentError("scale group index out of range");
  std::vector<std::vector<KernelGrid>> grids;
  for (std::size_t r = 0; r < bank.rotation.count; ++r) {
    grids.push_back(steered_basis(bank, group, r, policy));
  }
  return FilterTensor{combine(bank, grids, bank.extent(group, policy)),
                      bank.scale_groups[group].sigma(), bank.rotation.angles()};
}

Tensor dsigma_materialize(const FilterBank& bank, std::size_t group) {
  if (group >= bank.gamma()) throw ArgumentError("scale group index out of range");
  std::vector<std::vector<KernelGrid>> grids;
  for (std::size_t r = 0; r < bank.rotation.count; ++r) {
    grids.push_back(steered_basis_dsigma(bank, group, r));
  }
  return combine(bank, grids, bank.extent(group));
}

FilterBank inflate_rotations(const FilterBank& bank, std::size_t r_new) {
  if (r_new < 1) throw ArgumentError("inflate_rotations: R must be >= 1");
  FilterBank out = bank;
  out.rotation = RotationScheme{r_new};
  return out;
}

}  // namespace rsesf
