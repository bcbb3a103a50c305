#include "rsesf/eval.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "rsesf/error.hpp"
#include "rsesf/filterbank.hpp"

namespace rsesf {

std::vector<double> evaluate(const Model& model, std::span<const LabeledImage> data,
                             const OODTransform& transform, const EvalSettings& settings) {
  transform.validate();
  if (settings.rotations < 1) throw ArgumentError("evaluation needs at least one rotation channel");
  const Model inflated = with_rotations(model, settings.rotations);
  const auto filters = materialize_all(inflated);
  std::vector<double> scores;
  scores.reserve(data.size());
  for (const auto& sample : data) {
    const LabeledImage moved = apply_transform(sample, transform);
    const auto pred = predict(moved.image, inflated, filters, settings.reduction);
    std::size_t margin = 0;
    if (settings.margin == MarginPolicy::off_axis && !transform.is_quarter_turn()) {
      margin = rotation_margin(moved.mask.height);
    }
    scores.push_back(miou(pred.label_map, moved.mask, inflated.classes(), margin));
  }
  return scores;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

std::vector<LabeledImage> augment_quarter_turns(std::span<const LabeledImage> data) {
  std::vector<LabeledImage> out;
  out.reserve(4 * data.size());
  for (const auto& sample : data) {
    for (int t = 0; t < 4; ++t) out.push_back({rot90(sample.image, t), rot90(sample.mask, t)});
  }
  return out;
}

Tensor blob_image(std::size_t size, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor image({1, size, size});
  const double n = static_cast<double>(size);
  for (std::size_t b = 0; b < count; ++b) {
    const double cx = (0.25 + 0.5 * uniform01(rng)) * n;
    const double cy = (0.25 + 0.5 * uniform01(rng)) * n;
    const double sa = (0.04 + 0.06 * uniform01(rng)) * n;
    const double sb = (0.02 + 0.03 * uniform01(rng)) * n;
    const double phi = std::numbers::pi * uniform01(rng);
    const double amp = 0.3 + 0.7 * uniform01(rng);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t col = 0; col < size; ++col) {
        const double x = static_cast<double>(col) - cx;
        const double y = static_cast<double>(r) - cy;
        const double u = c * x + s * y;
        const double v = -s * x + c * y;
        image(0, r, col) += amp * std::exp(-0.5 * (u * u / (sa * sa) + v * v / (sb * sb)));
      }
    }
  }
  const double peak = image.max_abs();
  if (peak > 0.0) {
    for (auto& v : image.values()) v /= peak;
  }
  return image;
}

}  // namespace rsesf
