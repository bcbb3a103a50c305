#include "rsesf/conv.hpp"

#include <algorithm>
#include <string>

#include "rsesf/error.hpp"

namespace rsesf {
namespace {

struct ColumnRange {
  std::size_t begin;
  std::size_t end;
};

// Columns x with 0 <= x + dx < w.
ColumnRange valid_columns(long dx, std::size_t w) {
  const long lo = std::max(0L, -dx);
  const long hi = std::min(static_cast<long>(w), static_cast<long>(w) - dx);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void check_kernel(std::size_t extent, std::size_t kernel_size) {
  if (extent % 2 == 0) throw ArgumentError("kernel extent must be odd");
  if (kernel_size != extent * extent) throw ShapeError("kernel size does not match extent");
}

}  // namespace

void correlate_accumulate(std::span<const double> in, std::size_t h, std::size_t w,
                          std::span<const double> kernel, std::size_t extent,
                          std::span<double> out) {
  check_kernel(extent, kernel.size());
  const long half = static_cast<long>(extent / 2);
  for (std::size_t kr = 0; kr < extent; ++kr) {
    const long dy = static_cast<long>(kr) - half;
    for (std::size_t y = 0; y < h; ++y) {
      const long sy = static_cast<long>(y) + dy;
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      const double* src = in.data() + static_cast<std::size_t>(sy) * w;
      double* dst = out.data() + y * w;
      for (std::size_t kc = 0; kc < extent; ++kc) {
        const double weight = kernel[kr * extent + kc];
        if (weight == 0.0) continue;
        const long dx = static_cast<long>(kc) - half;
        const auto cols = valid_columns(dx, w);
        if (cols.begin == cols.end) continue;
        const double* s = src + static_cast<long>(cols.begin) + dx;
        double* o = dst + cols.begin;
        for (std::size_t x = 0; x < cols.end - cols.begin; ++x) o[x] += weight * s[x];
      }
    }
  }
}

void correlate_adjoint_accumulate(std::span<const double> dout, std::size_t h, std::size_t w,
                                  std::span<const double> kernel, std::size_t extent,
                                  std::span<double> din) {
  check_kernel(extent, kernel.size());
  const long half = static_cast<long>(extent / 2);
  for (std::size_t kr = 0; kr < extent; ++kr) {
    const long dy = static_cast<long>(kr) - half;
    for (std::size_t y = 0; y < h; ++y) {
      const long sy = static_cast<long>(y) + dy;
      if (sy < 0 || sy >= static_cast<long>(h)) continue;
      const double* g = dout.data() + y * w;
      double* dst = din.data() + static_cast<std::size_t>(sy) * w;
      for (std::size_t kc = 0; kc < extent; ++kc) {
        const double weight = kernel[kr * extent + kc];
        if (weight == 0.0) continue;
        const long dx = static_cast<long>(kc) - half;
        const auto cols = valid_columns(dx, w);
        if (cols.begin == cols.end) continue;
        double* d = dst + static_cast<long>(cols.begin) + dx;
        const double* gg = g + cols.begin;
        for (std::size_t x = 0; x < cols.end - cols.begin; ++x) d[x] += weight * gg[x];
      }
    }
  }
}

void correlate_kernel_gradient(std::span<const double> in, std::span<const double> dout,
                               std::size_t h, std::size_t w, std::size_t extent,
                               std::span<double> dkernel) {
  check_kernel(extent, dkernel.size());
  const long half = static_cast<long>(extent / 2);
  for (std::size_t kr = 0; kr < extent; ++kr) {
    const long dy = static_cast<long>(kr) - half;
    for (std::size_t kc = 0; kc < extent; ++kc) {
      const long dx = static_cast<long>(kc) - half;
      const auto cols = valid_columns(dx, w);
      if (cols.begin == cols.end) continue;
      double acc = 0.0;
      for (std::size_t y = 0; y < h; ++y) {
        const long sy = static_cast<long>(y) + dy;
        if (sy < 0 || sy >= static_cast<long>(h)) continue;
        const double* s = in.data() + static_cast<long>(static_cast<std::size_t>(sy) * w + cols.begin) + dx;
        const double* g = dout.data() + y * w + cols.begin;
        for (std::size_t x = 0; x < cols.end - cols.begin; ++x) acc += g[x] * s[x];
      }
      dkernel[kr * extent + kc] += acc;
    }
  }
}

Tensor conv2d_same(const Tensor& input, const KernelGrid& kernel) {
  if (input.rank() != 2) throw ShapeError("conv2d_same expects a rank-2 input");
  Tensor out(input.shape());
  correlate_accumulate(input.values(), input.dim(0), input.dim(1), kernel.values(),
                       kernel.extent(), out.values());
  return out;
}

FeatureMap first_layer_forward(const Tensor& image, const FilterTensor& tensor) {
  if (image.rank() != 3) throw ShapeError("image must be [C, H, W]");
  if (tensor.c_in() != image.dim(0)) {
    throw ShapeError("filter expects " + std::to_string(tensor.c_in()) +
                     " input channels, image has " + std::to_string(image.dim(0)));
  }
  const std::size_t h = image.dim(1);
  const std::size_t w = image.dim(2);
  const std::size_t ext = tensor.extent();
  FeatureMap out{Tensor({tensor.c_out(), tensor.rotations(), h, w}), 0, 1};
  for (std::size_t c = 0; c < tensor.c_out(); ++c) {
    for (std::size_t r = 0; r < tensor.rotations(); ++r) {
      auto dst = out.values.slab({c, r});
      for (std::size_t c0 = 0; c0 < tensor.c_in(); ++c0) {
        correlate_accumulate(image.slab({c0}), h, w, tensor.values.slab({c, c0, r}), ext, dst);
      }
    }
  }
  return out;
}

Tensor sum_over_rotations(const Tensor& filter_values) {
  const auto& s = filter_values.shape();
  Tensor out({s[0], s[1], 1, s[3], s[4]});
  for (std::size_t c = 0; c < s[0]; ++c) {
    for (std::size_t d = 0; d < s[1]; ++d) {
      auto dst = out.slab({c, d, 0});
      for (std::size_t r = 0; r < s[2]; ++r) {
        const auto src = filter_values.slab({c, d, r});
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += src[p];
      }
    }
  }
  return out;
}

FeatureMap hidden_layer_forward(const FeatureMap& fmap, const FilterTensor& tensor,
                                HiddenMode mode) {
  if (tensor.c_in() != fmap.channels()) {
    throw ShapeError("filter expects " + std::to_string(tensor.c_in()) +
                     " input channels, feature map has " + std::to_string(fmap.channels()));
  }
  if (mode == HiddenMode::steered_per_channel && tensor.rotations() != fmap.rotations()) {
    throw ShapeError("steered-per-channel mode needs matching rotation counts");
  }
  const std::size_t h = fmap.height();
  const std::size_t w = fmap.width();
  const std::size_t ext = tensor.extent();
  const std::size_t rots = fmap.rotations();
  const Tensor summed =
      mode == HiddenMode::summed_orientations ? sum_over_rotations(tensor.values) : Tensor{};
  FeatureMap out{Tensor({tensor.c_out(), rots, h, w}), fmap.scale_group, fmap.layer + 1};
  for (std::size_t c = 0; c < tensor.c_out(); ++c) {
    for (std::size_t r = 0; r < rots; ++r) {
      auto dst = out.values.slab({c, r});
      for (std::size_t d = 0; d < fmap.channels(); ++d) {
        const auto kernel = mode == HiddenMode::summed_orientations ? summed.slab({c, d, 0})
                                                                    : tensor.values.slab({c, d, r});
        correlate_accumulate(fmap.values.slab({d, r}), h, w, kernel, ext, dst);
      }
    }
  }
  return out;
}

FeatureMap relu(FeatureMap fmap) {
  // NaN passes through so callers can locate it.
  for (auto& v : fmap.values.values()) {
    if (v < 0.0) v = 0.0;
  }
  return fmap;
}

FeatureMap rotpool_max(const FeatureMap& fmap) {
  const std::size_t area = fmap.height() * fmap.width();
  FeatureMap out{Tensor({fmap.channels(), 1, fmap.height(), fmap.width()}), fmap.scale_group,
                 fmap.layer};
  for (std::size_t c = 0; c < fmap.channels(); ++c) {
    auto dst = out.values.slab({c, 0});
    const auto first = fmap.values.slab({c, 0});
    std::copy(first.begin(), first.end(), dst.begin());
    for (std::size_t r = 1; r < fmap.rotations(); ++r) {
      const auto src = fmap.values.slab({c, r});
      for (std::size_t p = 0; p < area; ++p) dst[p] = std::max(dst[p], src[p]);
    }
  }
  return out;
}

namespace {

FeatureMap take_slices(const FeatureMap& fmap, const std::vector<std::size_t>& slice_per_channel) {
  FeatureMap out{Tensor({fmap.channels(), 1, fmap.height(), fmap.width()}), fmap.scale_group,
                 fmap.layer};
  for (std::size_t c = 0; c < fmap.channels(); ++c) {
    const auto src = fmap.values.slab({c, slice_per_channel[c]});
    std::copy(src.begin(), src.end(), out.values.slab({c, 0}).begin());
  }
  return out;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

UnifiedSelection rotselect_unified(const FeatureMap& fmap) {
  std::vector<double> totals(fmap.rotations(), 0.0);
  for (std::size_t r = 0; r < fmap.rotations(); ++r) {
    for (std::size_t c = 0; c < fmap.channels(); ++c) {
      for (double v : fmap.values.slab({c, r})) totals[r] += v;
    }
  }
  const std::size_t best = argmax_first(totals);
  return {take_slices(fmap, std::vector<std::size_t>(fmap.channels(), best)), best};
}

FeatureMap rotselect_per_channel(const FeatureMap& fmap) {
  std::vector<std::size_t> chosen(fmap.channels());
  for (std::size_t c = 0; c < fmap.channels(); ++c) {
    std::vector<double> totals(fmap.rotations(), 0.0);
    for (std::size_t r = 0; r < fmap.rotations(); ++r) {
      for (double v : fmap.values.slab({c, r})) totals[r] += v;
    }
    chosen[c] = argmax_first(totals);
  }
  return take_slices(fmap, chosen);
}

FeatureMap reduce_rotations(const FeatureMap& fmap, RotationReduction reduction) {
  switch (reduction) {
    case RotationReduction::max: return rotpool_max(fmap);
    case RotationReduction::unified: return rotselect_unified(fmap).map;
    case RotationReduction::per_channel: return rotselect_per_channel(fmap);
  }
  throw ArgumentError("unknown rotation reduction");
}

Tensor roll_rotations(const Tensor& values, long shift) {
  if (values.rank() != 4) throw ShapeError("roll_rotations expects [C, R, H, W]");
  const long rots = static_cast<long>(values.dim(1));
  Tensor out(values.shape());
  for (std::size_t c = 0; c < values.dim(0); ++c) {
    for (long r = 0; r < rots; ++r) {
      const long src = (((r - shift) % rots) + rots) % rots;
      const auto from = values.slab({c, static_cast<std::size_t>(src)});
      std::copy(from.begin(), from.end(), out.slab({c, static_cast<std::size_t>(r)}).begin());
    }
  }
  return out;
}

}  // namespace rsesf
