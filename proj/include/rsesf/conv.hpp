#pragma once

#include <cstddef>
#include <span>

#include "rsesf/basis.hpp"
#include "rsesf/filterbank.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf {

/// Activations of one scale group: values[C, R, H, W].
struct FeatureMap {
  Tensor values;
  std::size_t scale_group = 0;
  int layer = 0;

  std::size_t channels() const { return values.dim(0); }
  std::size_t rotations() const { return values.dim(1); }
  std::size_t height() const { return values.dim(2); }
  std::size_t width() const { return values.dim(3); }
};

enum class HiddenMode {
  steered_per_channel,  ///< rotation channel r only meets filters steered to theta_r
  summed_orientations,  ///< filters summed over all orientations, then applied per channel
};

enum class RotationReduction { max, unified, per_channel };

// Plane primitives. Planes are row-major h x w; kernels are odd-sided squares.
// All loops run in a fixed order so results are bit-reproducible.

/// out[y, x] += sum_{dy, dx} k[dy, dx] * in[y + dy, x + dx]   (zero padding)
void correlate_accumulate(std::span<const double> in, std::size_t h, std::size_t w,
                          std::span<const double> kernel, std::size_t extent,
                          std::span<double> out);

/// Adjoint of correlate_accumulate with respect to `in`:
/// din[y + dy, x + dx] += k[dy, dx] * dout[y, x]
void correlate_adjoint_accumulate(std::span<const double> dout, std::size_t h, std::size_t w,
                                  std::span<const double> kernel, std::size_t extent,
                                  std::span<double> din);

/// Gradient of correlate_accumulate with respect to the kernel:
/// dk[dy, dx] += sum_{y, x} dout[y, x] * in[y + dy, x + dx]
void correlate_kernel_gradient(std::span<const double> in, std::span<const double> dout,
                               std::size_t h, std::size_t w, std::size_t extent,
                               std::span<double> dkernel);

/// Same-size cross-correlation (kernel not flipped) with zero padding.
/// `input` is rank 2 [H, W].
Tensor conv2d_same(const Tensor& input, const KernelGrid& kernel);

/// out[c, r] = sum_{c0} conv2d_same(image[c0], tensor[c, c0, r]); image is [C0, H, W].
FeatureMap first_layer_forward(const Tensor& image, const FilterTensor& tensor);

FeatureMap hidden_layer_forward(const FeatureMap& fmap, const FilterTensor& tensor,
                                HiddenMode mode = HiddenMode::steered_per_channel);

/// Sum of the filter tensor over its rotation axis, returned with R = 1.
Tensor sum_over_rotations(const Tensor& filter_values);

FeatureMap relu(FeatureMap fmap);

/// Elementwise max over the rotation axis.
FeatureMap rotpool_max(const FeatureMap& fmap);

struct UnifiedSelection {
  FeatureMap map;
  std::size_t index = 0;  ///< zero-based winning rotation slice
};

/// Picks the rotation slice with the largest total activation (lowest index on ties).
UnifiedSelection rotselect_unified(const FeatureMap& fmap);

/// Per filter channel, picks the rotation slice with the largest spatial sum.
FeatureMap rotselect_per_channel(const FeatureMap& fmap);

FeatureMap reduce_rotations(const FeatureMap& fmap, RotationReduction reduction);

/// out[:, r] = in[:, (r - shift) mod R] for a [C, R, H, W] tensor.
Tensor roll_rotations(const Tensor& values, long shift);

}  // namespace rsesf
