#pragma once

// Equivariance audit: numerical checks of the architecture's symmetry
// properties, run against a concrete model.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rsesf/basis.hpp"
#include "rsesf/net.hpp"

namespace rsesf {

struct AuditThresholds {
  double steering = 1e-12;          ///< max relative pointwise steering error
  double quarter_turn = 1e-10;      ///< relative L2, 90 degree feature equivariance
  double label_agreement = 1.0;     ///< minimum pixel agreement of label maps at 90 degrees
  double arbitrary_angle = 0.15;    ///< relative interior L2 at 45 degrees, R = 8
  double scale_consistency = 1e-6;  ///< relative Gaussian semigroup residual between groups
};

/// Adds `magnitude` * U(-1, 1) noise to one materialized rotation slice.
struct FaultInjection {
  std::size_t layer = 0;  ///< zero-based
  std::size_t group = 0;
  std::size_t slice = 0;
  double magnitude = 0.5;
};

struct AuditOptions {
  AuditThresholds thresholds;
  std::size_t image_size = 32;         ///< noise input of the 90 degree checks
  std::size_t smooth_image_size = 96;  ///< blob input of the 45 degree check
  double supersample = 4.0;            ///< grid refinement of the scale check
  std::uint64_t seed = 0;
  std::size_t steering_trials = 64;
  std::optional<FaultInjection> fault;
};

struct AuditCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool higher_is_better = false;
  bool pass = false;
};

struct AuditReport {
  AuditOptions options;
  std::vector<AuditCheck> checks;

  bool passed() const;
  /// Header lines with every threshold, then CSV "check,value,threshold,status".
  std::string to_text() const;
};

AuditReport run_audit(const Model& model, const AuditOptions& options);

/// Direct pointwise evaluation of the rotated Gaussian derivative of orders
/// (i, j) along (theta, theta + pi/2); independent of the steering expansion.
KernelGrid sample_rotated_direct(int i, int j, double theta, double sigma, std::size_t extent);

/// Max over random (i, j, theta, sigma, extent) of max|steer - direct| / max|direct|.
double steering_residual(std::size_t trials, std::uint64_t seed);

/// Max over basis elements and adjacent groups k, k+1 (at their live sigma) of
/// the relative residual of G(s) * B(sigma_k) vs B(sigma_{k+1}), s^2 = sigma_{k+1}^2 - sigma_k^2.
/// All sigmas are multiplied by `supersample`, i.e. the relation is checked on
/// a finer grid; on the native grid aliasing dominates below sigma ~ 1.
double scale_consistency_residual(const FilterBank& bank, double supersample = 4.0);

}  // namespace rsesf
