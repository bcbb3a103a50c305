#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rsesf/basis.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf {

/// One scale interval (lower, upper) with a trainable logit:
///   sigma(x) = (a - b)/2 * tanh(x) + (a + b)/2,  a = upper, b = lower.
class ScaleGroupSpec {
 public:
  ScaleGroupSpec(double upper, double lower, double logit = 0.0);

  double upper() const noexcept { return upper_; }
  double lower() const noexcept { return lower_; }
  double logit() const noexcept { return logit_; }
  void set_logit(double x) noexcept { logit_ = x; }

  double sigma() const noexcept;
  /// d sigma / d logit = (a - b)/2 * (1 - tanh^2 x).
  double dsigma_dlogit() const noexcept;
  double midpoint() const noexcept { return 0.5 * (upper_ + lower_); }

  bool operator==(const ScaleGroupSpec&) const = default;

 private:
  double upper_;
  double lower_;
  double logit_;
};

double sigma_of(const ScaleGroupSpec& group);

/// Builds contiguous groups from ascending edges e0 < e1 < ... < e_gamma:
/// group k spans (e_k, e_{k+1}).
std::vector<ScaleGroupSpec> make_scale_groups(std::span<const double> edges);

/// Throws ArgumentError unless groups are ordered, disjoint and contiguous.
void validate_scale_groups(std::span<const ScaleGroupSpec> groups);

/// R orientations; index r in [0, R) carries theta = 2 pi (r + 1) / R, so the
/// last slice is always theta = 2 pi.
struct RotationScheme {
  std::size_t count = 1;

  double angle(std::size_t index) const;
  std::vector<double> angles() const;
  bool operator==(const RotationScheme&) const = default;
};

/// 2 * ceil(2.5 sigma) + 1.
std::size_t kernel_extent(double sigma);

enum class ExtentPolicy {
  upper_bound,  ///< extent from the group's upper bound a (fixed while training)
  live_sigma,   ///< extent from the current sigma
};

/// Learnable expansion coefficients of one layer, shared by every scale group
/// and rotation channel.
struct FilterBank {
  int layer_index = 1;
  std::size_t c_out = 0;
  std::size_t c_in = 0;
  int order = 2;
  Tensor alpha;  ///< [c_out, c_in, B]
  std::vector<ScaleGroupSpec> scale_groups;
  RotationScheme rotation;

  std::size_t basis_size() const { return alpha.dim(2); }
  std::size_t gamma() const noexcept { return scale_groups.size(); }
  std::size_t extent(std::size_t group, ExtentPolicy policy = ExtentPolicy::upper_bound) const;
  /// alpha entries plus one logit per scale group.
  std::size_t parameter_count() const noexcept { return alpha.size() + scale_groups.size(); }
  void validate() const;

  bool operator==(const FilterBank&) const = default;
};

/// Materialized filters of one scale group: values[c_out, c_in, R, h, w].
struct FilterTensor {
  Tensor values;
  double sigma_used = 0.0;
  std::vector<double> theta_list;

  std::size_t c_out() const { return values.dim(0); }
  std::size_t c_in() const { return values.dim(1); }
  std::size_t rotations() const { return values.dim(2); }
  std::size_t extent() const { return values.dim(3); }
};

/// New bank with alpha ~ U(-h, h), h = 1/sqrt(c_in B), each basis column then
/// divided by the L2 norm of that basis element (theta = 0) at the midpoint
/// sigma of the middle scale group. Logits start at 0.
FilterBank make_filter_bank(int layer_index, std::size_t c_out, std::size_t c_in, int order,
                            std::vector<ScaleGroupSpec> groups, RotationScheme rotation,
                            std::mt19937_64& rng);

/// Steered basis grids for one group and rotation slice, ordered as basis_list.
std::vector<KernelGrid> steered_basis(const FilterBank& bank, std::size_t group,
                                      std::size_t rotation_index,
                                      ExtentPolicy policy = ExtentPolicy::upper_bound);
std::vector<KernelGrid> steered_basis_dsigma(const FilterBank& bank, std::size_t group,
                                             std::size_t rotation_index);

FilterTensor materialize(const FilterBank& bank, std::size_t group,
                         ExtentPolicy policy = ExtentPolicy::upper_bound);

/// Elementwise d(materialize)/d sigma for the group (upper-bound extent).
Tensor dsigma_materialize(const FilterBank& bank, std::size_t group);

/// Same coefficients and scale groups with r_new rotation channels.
FilterBank inflate_rotations(const FilterBank& bank, std::size_t r_new);

/// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
double uniform01(std::mt19937_64& rng);

}  // namespace rsesf
