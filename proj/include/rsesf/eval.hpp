#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsesf/data.hpp"
#include "rsesf/image.hpp"
#include "rsesf/net.hpp"

namespace rsesf {

enum class MarginPolicy {
  off_axis,  ///< exclude rotation_margin(H) only when the angle is not a quarter turn
  none,
};

struct EvalSettings {
  std::size_t rotations = 4;
  RotationReduction reduction = RotationReduction::max;
  MarginPolicy margin = MarginPolicy::off_axis;
};

/// mIoU of every sample after `transform`, in dataset order. The model is
/// inflated to `settings.rotations` channels first.
std::vector<double> evaluate(const Model& model, std::span<const LabeledImage> data,
                             const OODTransform& transform, const EvalSettings& settings);

double mean(std::span<const double> values);

/// Every sample followed by its 90, 180 and 270 degree turns.
std::vector<LabeledImage> augment_quarter_turns(std::span<const LabeledImage> data);

/// A smooth test image: sum of `count` anisotropic Gaussian blobs, values in [0, 1].
Tensor blob_image(std::size_t size, std::size_t count, std::uint64_t seed);

}  // namespace rsesf
