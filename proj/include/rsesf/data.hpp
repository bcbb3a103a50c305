#pragma once

// Procedural oriented-stripe mosaics and the rotate/rescale transforms used
// for out-of-distribution evaluation.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rsesf/image.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf {

/// Texture layout of a mosaic. Class k is a sinusoidal stripe pattern whose
/// intensity gradient points along orientations[k] (radians, x = column,
/// y = row), with the given period (pixels) and contrast in (0, 1].
struct MosaicSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t classes = 5;
  std::vector<double> orientations;
  std::vector<double> periods;
  std::vector<double> contrasts;

  /// orientations pi k / K, period 6, contrast 0.8.
  static MosaicSpec defaults(std::size_t size, std::size_t classes);
  void validate() const;
};

/// K Voronoi regions from K seeded sites; region k carries class k's texture
/// with a random phase. Layouts whose sites are closer than
/// max(1, 0.35 min(H, W) / sqrt(K)) or that leave a region empty are
/// redrawn from the same generator.
LabeledImage gen_mosaic(const MosaicSpec& spec, std::uint64_t seed);

/// splitmix64 of (base, index); used to give every mosaic its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

enum class Interpolation { bilinear, nearest };

/// Quarter turns of the trailing two axes: out[r][c] = in[H-1-c][r] per turn.
Tensor rot90(const Tensor& planes, int quarter_turns = 1);
LabelMap rot90(const LabelMap& mask, int quarter_turns = 1);

/// Rotation about the image center, out(p) = in(R(-angle) p), applied to the
/// trailing two axes (which must be square). Multiples of pi/2 use exact
/// index remapping; otherwise out-of-frame samples are 0.
Tensor rotate_image(const Tensor& planes, double angle,
                    Interpolation interpolation = Interpolation::bilinear);
/// Nearest-neighbour rotation; out-of-frame pixels become class 0.
LabelMap rotate_mask(const LabelMap& mask, double angle);

/// Resample trailing two axes to round(factor * dims), pixel-center aligned,
/// edge samples clamped.
Tensor rescale_image(const Tensor& planes, double factor,
                     Interpolation interpolation = Interpolation::bilinear);
LabelMap rescale_mask(const LabelMap& mask, double factor);

struct OODTransform {
  double angle = 0.0;  ///< radians
  double scale = 1.0;  ///< in [0.5, 2]

  void validate() const;
  bool is_quarter_turn() const;
};

/// Rotate then rescale both image and mask.
LabeledImage apply_transform(const LabeledImage& sample, const OODTransform& transform);

/// Border excluded from metrics after an off-axis rotation: ceil((sqrt2 - 1)/2 H).
std::size_t rotation_margin(std::size_t height);

/// Exact k quarter turns when angle is within 1e-12 of k pi/2.
bool quarter_turns_of(double angle, int& turns);

}  // namespace rsesf
