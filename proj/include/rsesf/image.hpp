#pragma once

#include <cstddef>
#include <vector>

#include "rsesf/tensor.hpp"

namespace rsesf {

/// Per-pixel class indices, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, int fill = 0) : height(h), width(w), labels(h * w, fill) {}

  int& at(std::size_t row, std::size_t col) { return labels[row * width + col]; }
  int at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }
  std::size_t size() const noexcept { return labels.size(); }

  bool operator==(const LabelMap&) const = default;
};

/// An input image [C, H, W] (values in [0, 1]) paired with its mask.
struct LabeledImage {
  Tensor image;
  LabelMap mask;
};

}  // namespace rsesf
