#include "rsesf/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "rsesf/error.hpp"
#include "rsesf/filterbank.hpp"

namespace rsesf {

MosaicSpec MosaicSpec::defaults(std::size_t size, std::size_t classes) {
  MosaicSpec spec;
  spec.height = size;
  spec.width = size;
  spec.classes = classes;
  for (std::size_t k = 0; k < classes; ++k) {
    spec.orientations.push_back(std::numbers::pi * static_cast<double>(k) /
                                static_cast<double>(classes));
    spec.periods.push_back(6.0);
    spec.contrasts.push_back(0.8);
  }
  return spec;
}

void MosaicSpec::validate() const {
  if (height == 0 || width == 0) throw ArgumentError("mosaic size must be positive");
  if (classes == 0 || classes > 255) throw ArgumentError("mosaic class count must be in 1..255");
  if (orientations.size() != classes || periods.size() != classes || contrasts.size() != classes) {
    throw ArgumentError("mosaic needs one orientation, period and contrast per class");
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (!(periods[k] >= 2.0)) throw ArgumentError("stripe period must be >= 2 px");
    if (!(contrasts[k] > 0.0 && contrasts[k] <= 1.0)) {
      throw ArgumentError("stripe contrast must be in (0, 1]");
    }
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

LabeledImage gen_mosaic(const MosaicSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t h = spec.height;
  const std::size_t w = spec.width;
  const std::size_t k_count = spec.classes;
  std::mt19937_64 rng(seed);

  const double min_sep = std::max(
      1.0, 0.35 * static_cast<double>(std::min(h, w)) / std::sqrt(static_cast<double>(k_count)));
  std::vector<double> sx(k_count), sy(k_count);
  LabelMap mask(h, w);
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) throw ArgumentError("could not place mosaic regions; image too small");
    for (std::size_t k = 0; k < k_count; ++k) {
      sx[k] = uniform01(rng) * static_cast<double>(w);
      sy[k] = uniform01(rng) * static_cast<double>(h);
    }
    bool ok = true;
    for (std::size_t a = 0; a < k_count && ok; ++a) {
      for (std::size_t b = a + 1; b < k_count && ok; ++b) {
        ok = std::hypot(sx[a] - sx[b], sy[a] - sy[b]) >= min_sep;
      }
    }
    if (!ok) continue;
    std::vector<std::size_t> counts(k_count, 0);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double px = static_cast<double>(c) + 0.5;
        const double py = static_cast<double>(r) + 0.5;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < k_count; ++k) {
          const double d = (px - sx[k]) * (px - sx[k]) + (py - sy[k]) * (py - sy[k]);
          if (d < best_d) {
            best_d = d;
            best = k;
          }
        }
        mask.at(r, c) = static_cast<int>(best);
        ++counts[best];
      }
    }
    if (std::find(counts.begin(), counts.end(), 0) == counts.end()) break;
  }

  std::vector<double> phase(k_count);
  for (auto& p : phase) p = 2.0 * std::numbers::pi * uniform01(rng);

  Tensor image({1, h, w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto k = static_cast<std::size_t>(mask.at(r, c));
      const double proj = static_cast<double>(c) * std::cos(spec.orientations[k]) +
                          static_cast<double>(r) * std::sin(spec.orientations[k]);
      image(0, r, c) = 0.5 + 0.5 * spec.contrasts[k] *
                                 std::sin(2.0 * std::numbers::pi * proj / spec.periods[k] + phase[k]);
    }
  }
  return {std::move(image), std::move(mask)};
}

// ---------------------------------------------------------------------------
// Geometric transforms

namespace {

struct PlaneLayout {
  std::size_t planes;
  std::size_t h;
  std::size_t w;
};

PlaneLayout layout_of(const Tensor& t) {
  if (t.rank() < 2) throw ShapeError("expected at least two axes");
  const std::size_t h = t.dim(t.rank() - 2);
  const std::size_t w = t.dim(t.rank() - 1);
  return {t.size() / std::max<std::size_t>(1, h * w), h, w};
}

std::vector<std::size_t> with_plane_dims(const Tensor& t, std::size_t h, std::size_t w) {
  auto shape = t.shape();
  shape[shape.size() - 2] = h;
  shape[shape.size() - 1] = w;
  return shape;
}

// One quarter turn of an h x w plane into a w x h plane.
template <class T>
void rot90_plane(const T* in, std::size_t h, std::size_t w, T* out) {
  for (std::size_t r = 0; r < w; ++r) {
    for (std::size_t c = 0; c < h; ++c) out[r * h + c] = in[(h - 1 - c) * w + r];
  }
}

int normalized_turns(int turns) { return ((turns % 4) + 4) % 4; }

double bilinear_at(const double* plane, std::size_t h, std::size_t w, double x, double y,
                   double fill) {
  constexpr double kSnap = 1e-9;
  const double max_x = static_cast<double>(w - 1);
  const double max_y = static_cast<double>(h - 1);
  if (x < -kSnap || y < -kSnap || x > max_x + kSnap || y > max_y + kSnap) return fill;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = (1.0 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1];
  const double bottom = (1.0 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1];
  return (1.0 - fy) * top + fy * bottom;
}

}  // namespace

bool quarter_turns_of(double angle, int& turns) {
  const double q = angle / (std::numbers::pi / 2.0);
  const double k = std::round(q);
  if (std::abs(q - k) >= 1e-12) return false;
  turns = normalized_turns(static_cast<int>(std::fmod(k, 4.0)));
  return true;
}

Tensor rot90(const Tensor& planes, int quarter_turns) {
  const int turns = normalized_turns(quarter_turns);
  Tensor current = planes;
  for (int t = 0; t < turns; ++t) {
    const auto [n, h, w] = layout_of(current);
    Tensor next(with_plane_dims(current, w, h));
    for (std::size_t p = 0; p < n; ++p) {
      rot90_plane(current.values().data() + p * h * w, h, w, next.values().data() + p * h * w);
    }
    current = std::move(next);
  }
  return current;
}

LabelMap rot90(const LabelMap& mask, int quarter_turns) {
  const int turns = normalized_turns(quarter_turns);
  LabelMap current = mask;
  for (int t = 0; t < turns; ++t) {
    LabelMap next(current.width, current.height);
    rot90_plane(current.labels.data(), current.height, current.width, next.labels.data());
    current = std::move(next);
  }
  return current;
}

Tensor rotate_image(const Tensor& planes, double angle, Interpolation interpolation) {
  const auto [n, h, w] = layout_of(planes);
  if (h != w) throw ShapeError("rotate_image expects square planes");
  int turns = 0;
  if (quarter_turns_of(angle, turns)) return rot90(planes, turns);

  const double cx = 0.5 * static_cast<double>(w - 1);
  const double cy = 0.5 * static_cast<double>(h - 1);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  Tensor out(planes.shape());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double x = static_cast<double>(c) - cx;
      const double y = static_cast<double>(r) - cy;
      const double src_x = ca * x + sa * y + cx;
      const double src_y = -sa * x + ca * y + cy;
      for (std::size_t p = 0; p < n; ++p) {
        const double* plane = planes.values().data() + p * h * w;
        double v = 0.0;
        if (interpolation == Interpolation::bilinear) {
          v = bilinear_at(plane, h, w, src_x, src_y, 0.0);
        } else {
          const double rx = std::round(src_x);
          const double ry = std::round(src_y);
          if (rx >= 0 && ry >= 0 && rx < static_cast<double>(w) && ry < static_cast<double>(h)) {
            v = plane[static_cast<std::size_t>(ry) * w + static_cast<std::size_t>(rx)];
          }
        }
        out.values()[p * h * w + r * w + c] = v;
      }
    }
  }
  return out;
}

LabelMap rotate_mask(const LabelMap& mask, double angle) {
  if (mask.height != mask.width) throw ShapeError("rotate_mask expects a square mask");
  int turns = 0;
  if (quarter_turns_of(angle, turns)) return rot90(mask, turns);
  const std::size_t n = mask.height;
  const double center = 0.5 * static_cast<double>(n - 1);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  LabelMap out(n, n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double x = static_cast<double>(c) - center;
      const double y = static_cast<double>(r) - center;
      const double sx = std::round(ca * x + sa * y + center);
      const double sy = std::round(-sa * x + ca * y + center);
      if (sx >= 0 && sy >= 0 && sx < static_cast<double>(n) && sy < static_cast<double>(n)) {
        out.at(r, c) = mask.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      }
    }
  }
  return out;
}

namespace {

std::size_t scaled_dim(std::size_t dim, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ArgumentError("rescale factor must be > 0");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(factor * static_cast<double>(dim))));
}

// Source coordinate of destination index under pixel-center alignment.
double source_coord(std::size_t dst, std::size_t in_dim, std::size_t out_dim) {
  return (static_cast<double>(dst) + 0.5) * static_cast<double>(in_dim) /
             static_cast<double>(out_dim) - 0.5;
}

std::size_t nearest_index(std::size_t dst, std::size_t in_dim, std::size_t out_dim) {
  const auto idx = static_cast<std::size_t>(
      std::floor((static_cast<double>(dst) + 0.5) * static_cast<double>(in_dim) /
                 static_cast<double>(out_dim)));
  return std::min(idx, in_dim - 1);
}

}  // namespace

Tensor rescale_image(const Tensor& planes, double factor, Interpolation interpolation) {
  const auto [n, h, w] = layout_of(planes);
  const std::size_t oh = scaled_dim(h, factor);
  const std::size_t ow = scaled_dim(w, factor);
  Tensor out(with_plane_dims(planes, oh, ow));
  for (std::size_t p = 0; p < n; ++p) {
    const double* plane = planes.values().data() + p * h * w;
    double* dst = out.values().data() + p * oh * ow;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        if (interpolation == Interpolation::nearest) {
          dst[r * ow + c] = plane[nearest_index(r, h, oh) * w + nearest_index(c, w, ow)];
        } else {
          const double sx = std::clamp(source_coord(c, w, ow), 0.0, static_cast<double>(w - 1));
          const double sy = std::clamp(source_coord(r, h, oh), 0.0, static_cast<double>(h - 1));
          dst[r * ow + c] = bilinear_at(plane, h, w, sx, sy, 0.0);
        }
      }
    }
  }
  return out;
}

LabelMap rescale_mask(const LabelMap& mask, double factor) {
  const std::size_t oh = scaled_dim(mask.height, factor);
  const std::size_t ow = scaled_dim(mask.width, factor);
  LabelMap out(oh, ow);
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      out.at(r, c) = mask.at(nearest_index(r, mask.height, oh), nearest_index(c, mask.width, ow));
    }
  }
  return out;
}

void OODTransform::validate() const {
  if (!std::isfinite(angle)) throw ArgumentError("rotation angle must be finite");
  if (!(scale >= 0.5 && scale <= 2.0)) {
    throw ArgumentError("scale factor must lie in [0.5, 2], got " + std::to_string(scale));
  }
}

bool OODTransform::is_quarter_turn() const {
  int turns = 0;
  return quarter_turns_of(angle, turns);
}

LabeledImage apply_transform(const LabeledImage& sample, const OODTransform& transform) {
  transform.validate();
  LabeledImage out{rotate_image(sample.image, transform.angle),
                   rotate_mask(sample.mask, transform.angle)};
  if (transform.scale != 1.0) {
    out.image = rescale_image(out.image, transform.scale);
    out.mask = rescale_mask(out.mask, transform.scale);
  }
  return out;
}

std::size_t rotation_margin(std::size_t height) {
  return static_cast<std::size_t>(
      std::ceil((std::numbers::sqrt2 - 1.0) / 2.0 * static_cast<double>(height)));
}

}  // namespace rsesf
