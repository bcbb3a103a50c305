#pragma once

// Shared fixtures for the test suites.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rsesf/image.hpp"
#include "rsesf/net.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf::testing {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Two-class toy: class 1 inside two Gaussian blobs, class 0 elsewhere.
LabeledImage blob_toy(std::size_t size, std::uint64_t seed);

/// Small model with every parameter family randomized (including logits).
Model random_small_model(std::size_t gamma, std::uint64_t seed);

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b);
/// True when both directories hold the same file names with identical bytes.
bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace rsesf::testing
