#include "rsesf/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "rsesf/conv.hpp"
#include "rsesf/data.hpp"
#include "rsesf/error.hpp"
#include "rsesf/eval.hpp"
#include "rsesf/filterbank.hpp"
#include "rsesf/io.hpp"

namespace rsesf {

KernelGrid sample_rotated_direct(int i, int j, double theta, double sigma, std::size_t extent) {
  if (i < 0 || j < 0 || i + j > kMaxBasisOrder) throw ArgumentError("unsupported basis order");
  KernelGrid grid(extent);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double s2 = sigma * sigma;
  const double s4 = s2 * s2;
  const int half = grid.half();
  for (int y = -half; y <= half; ++y) {
    for (int x = -half; x <= half; ++x) {
      const double u = c * x + s * y;
      const double v = -s * x + c * y;
      const double g = std::exp(-(x * x + y * y) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
      double d = 0.0;
      if (i == 0 && j == 0) d = 1.0;
      if (i == 1 && j == 0) d = -u / s2;
      if (i == 0 && j == 1) d = -v / s2;
      if (i == 2 && j == 0) d = u * u / s4 - 1.0 / s2;
      if (i == 1 && j == 1) d = u * v / s4;
      if (i == 0 && j == 2) d = v * v / s4 - 1.0 / s2;
      grid.at(static_cast<std::size_t>(y + half), static_cast<std::size_t>(x + half)) = d * g;
    }
  }
  return grid;
}

double steering_residual(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto elements = basis_list(2);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto e = elements[t % elements.size()];
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    const double sigma = 0.4 + 2.6 * uniform01(rng);
    const std::size_t extent = 2 * (1 + static_cast<std::size_t>(7.0 * uniform01(rng))) + 1;
    const auto steered = steer(e.i, e.j, theta, sigma, extent);
    const auto direct = sample_rotated_direct(e.i, e.j, theta, sigma, extent);
    double diff = 0.0;
    for (std::size_t k = 0; k < steered.values().size(); ++k) {
      diff = std::max(diff, std::abs(steered.values()[k] - direct.values()[k]));
    }
    worst = std::max(worst, diff / direct.max_abs());
  }
  return worst;
}

double scale_consistency_residual(const FilterBank& bank, double supersample) {
  if (!(supersample >= 1.0)) throw ArgumentError("supersampling factor must be >= 1");
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < bank.gamma(); ++k) {
    const double s_lo = supersample * bank.scale_groups[k].sigma();
    const double s_hi = supersample * bank.scale_groups[k + 1].sigma();
    const double s = std::sqrt(s_hi * s_hi - s_lo * s_lo);
    const std::size_t extent = 2 * static_cast<std::size_t>(std::ceil(6.0 * s_hi)) + 1;
    const std::size_t smooth_extent = 2 * static_cast<std::size_t>(std::ceil(6.0 * s)) + 1;
    const auto smoother = steer(0, 0, 0.0, s, smooth_extent);
    for (const auto e : basis_list(bank.order)) {
      const auto fine = steer(e.i, e.j, 0.0, s_lo, extent);
      const auto coarse = steer(e.i, e.j, 0.0, s_hi, extent);
      const Tensor plane({extent, extent}, std::vector<double>(fine.values().begin(),
                                                               fine.values().end()));
      const Tensor smoothed = conv2d_same(plane, smoother);
      double diff = 0.0;
      for (std::size_t p = 0; p < smoothed.size(); ++p) {
        diff = std::max(diff, std::abs(smoothed[p] - coarse.values()[p]));
      }
      worst = std::max(worst, diff / coarse.max_abs());
    }
  }
  return worst;
}

namespace {

void inject(MaterializedFilters& filters, const FaultInjection& fault, std::uint64_t seed) {
  if (fault.layer >= filters.size() || fault.group >= filters[fault.layer].size()) {
    throw ArgumentError("fault injection: layer or group out of range");
  }
  auto& tensor = filters[fault.layer][fault.group];
  if (fault.slice >= tensor.rotations()) return;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < tensor.c_out(); ++c) {
    for (std::size_t d = 0; d < tensor.c_in(); ++d) {
      for (auto& v : tensor.values.slab({c, d, fault.slice})) {
        v += fault.magnitude * (2.0 * uniform01(rng) - 1.0);
      }
    }
  }
}

Tensor noise_image(std::size_t channels, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor image({channels, size, size});
  for (auto& v : image.values()) v = uniform01(rng);
  return image;
}

Tensor center_crop(const Tensor& values) {
  const std::size_t rank = values.rank();
  const std::size_t h = values.dim(rank - 2);
  const std::size_t w = values.dim(rank - 1);
  const std::size_t planes = values.size() / (h * w);
  const std::size_t r0 = h / 4;
  const std::size_t c0 = w / 4;
  const std::size_t hh = h - 2 * r0;
  const std::size_t ww = w - 2 * c0;
  Tensor out({planes, hh, ww});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t r = 0; r < hh; ++r) {
      for (std::size_t c = 0; c < ww; ++c) {
        out(p, r, c) = values[p * h * w + (r + r0) * w + (c + c0)];
      }
    }
  }
  return out;
}

double label_agreement(const LabelMap& a, const LabelMap& b) {
  if (a.size() != b.size() || a.size() == 0) return 0.0;
  std::size_t same = 0;
  for (std::size_t p = 0; p < a.size(); ++p) same += a.labels[p] == b.labels[p];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace

bool AuditReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AuditCheck& c) { return c.pass; });
}

std::string AuditReport::to_text() const {
  const auto& t = options.thresholds;
  std::ostringstream out;
  out << "# equivariance audit\n"
      << "# threshold steering_identity <= " << format_double(t.steering) << "\n"
      << "# threshold quarter_turn_features <= " << format_double(t.quarter_turn) << "\n"
      << "# threshold quarter_turn_labels >= " << format_double(t.label_agreement) << "\n"
      << "# threshold arbitrary_angle_45 <= " << format_double(t.arbitrary_angle) << "\n"
      << "# threshold scale_consistency <= " << format_double(t.scale_consistency) << "\n"
      << "# inputs: " << options.image_size << "px noise (90 degree checks), "
      << options.smooth_image_size << "px blobs (45 degree check), scale check supersampled x"
      << format_double(options.supersample) << "\n";
  if (options.fault) {
    const auto& f = *options.fault;
    out << "# fault injected: layer " << f.layer + 1 << ", group " << f.group << ", slice "
        << f.slice << ", magnitude " << format_double(f.magnitude) << "\n";
  }
  out << "check,value,threshold,status\n";
  for (const auto& c : checks) {
    out << c.name << "," << format_double(c.value) << "," << format_double(c.threshold) << ","
        << (c.pass ? "pass" : "FAIL") << "\n";
  }
  out << "# overall: " << (passed() ? "pass" : "FAIL") << "\n";
  return out.str();
}

AuditReport run_audit(const Model& model, const AuditOptions& options) {
  AuditReport report;
  report.options = options;
  const auto& th = options.thresholds;
  auto add = [&](std::string name, double value, double threshold, bool higher_is_better) {
    const bool pass = std::isfinite(value) &&
                      (higher_is_better ? value >= threshold : value <= threshold);
    report.checks.push_back({std::move(name), value, threshold, higher_is_better, pass});
  };

  add("steering_identity", steering_residual(options.steering_trials, options.seed),
      th.steering, false);

  const std::size_t n = options.image_size;
  const std::size_t c0 = model.config.input_channels;

  // Exact 90 degree checks.
  const std::size_t r4 = model.rotations() % 4 == 0 ? model.rotations() : 4;
  const Model m4 = with_rotations(model, r4);
  auto filters4 = materialize_all(m4);
  if (options.fault) inject(filters4, *options.fault, derive_seed(options.seed, 7));
  const Tensor x = noise_image(c0, n, derive_seed(options.seed, 1));
  const Tensor x_rot = rot90(x, 1);
  double quarter = 0.0;
  for (std::size_t k = 0; k < m4.gamma(); ++k) {
    const auto f = forward_stream(x, m4, filters4, k);
    const auto g = forward_stream(x_rot, m4, filters4, k);
    const Tensor expected = roll_rotations(rot90(f.values, 1), static_cast<long>(r4 / 4));
    quarter = std::max(quarter, relative_l2(g.values, expected));
  }
  add("quarter_turn_features", quarter, th.quarter_turn, false);

  double agreement = 1.0;
  for (auto reduction : {RotationReduction::max, RotationReduction::unified}) {
    const auto p = predict(x, m4, filters4, reduction);
    const auto q = predict(x_rot, m4, filters4, reduction);
    agreement = std::min(agreement, label_agreement(q.label_map, rot90(p.label_map, 1)));
  }
  add("quarter_turn_labels", agreement, th.label_agreement, true);

  // Approximate 45 degree check at R = 8 on a smooth input.
  const Model m8 = with_rotations(model, 8);
  auto filters8 = materialize_all(m8);
  if (options.fault) inject(filters8, *options.fault, derive_seed(options.seed, 7));
  const std::size_t blob_size = options.smooth_image_size;
  const Tensor blob = blob_image(blob_size, 6, derive_seed(options.seed, 2));
  Tensor smooth({c0, blob_size, blob_size});
  for (std::size_t c = 0; c < c0; ++c) {
    std::copy(blob.values().begin(), blob.values().end(), smooth.slab({c}).begin());
  }
  const double angle = std::numbers::pi / 4.0;
  const Tensor smooth_rot = rotate_image(smooth, angle);
  double arbitrary = 0.0;
  for (std::size_t k = 0; k < m8.gamma(); ++k) {
    const auto f = forward_stream(smooth, m8, filters8, k);
    const auto g = forward_stream(smooth_rot, m8, filters8, k);
    const Tensor expected = roll_rotations(rotate_image(f.values, angle), 1);
    arbitrary = std::max(arbitrary, relative_l2(center_crop(g.values), center_crop(expected)));
  }
  add("arbitrary_angle_45", arbitrary, th.arbitrary_angle, false);

  double scale = 0.0;
  for (const auto& layer : model.layers) {
    scale = std::max(scale, scale_consistency_residual(layer, options.supersample));
  }
  add("scale_consistency", scale, th.scale_consistency, false);
  return report;
}

}  // namespace rsesf
