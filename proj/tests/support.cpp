#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "rsesf/filterbank.hpp"
#include "rsesf/io.hpp"

namespace rsesf::testing {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rsesf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

LabeledImage blob_toy(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabeledImage s{Tensor({1, size, size}), LabelMap(size, size)};
  const double n = static_cast<double>(size);
  for (int b = 0; b < 2; ++b) {
    const double cx = (0.2 + 0.6 * uniform01(rng)) * n;
    const double cy = (0.2 + 0.6 * uniform01(rng)) * n;
    const double rad = (0.12 + 0.08 * uniform01(rng)) * n;
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double d2 = std::pow(static_cast<double>(c) - cx, 2) +
                          std::pow(static_cast<double>(r) - cy, 2);
        s.image(0, r, c) = std::max(s.image(0, r, c), std::exp(-d2 / (2.0 * rad * rad)));
        if (d2 < rad * rad) s.mask.at(r, c) = 1;
      }
    }
  }
  return s;
}

Model random_small_model(std::size_t gamma, std::uint64_t seed) {
  ModelConfig config;
  config.channels = {3, 2};
  config.classes = 3;
  config.scale_edges.resize(gamma + 1);
  for (std::size_t k = 0; k <= gamma; ++k) config.scale_edges[k] = 0.5 + 0.4 * k;
  Model model = make_model(config, seed);
  std::mt19937_64 rng(seed + 1000);
  for (auto& layer : model.layers) {
    for (auto& g : layer.scale_groups) g.set_logit(2.0 * uniform01(rng) - 1.0);
  }
  for (auto& b : model.head.bias.values()) b = 0.5 * (2.0 * uniform01(rng) - 1.0);
  for (auto& x : model.scale_weights.logits) x = 2.0 * uniform01(rng) - 1.0;
  return model;
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return read_file(a) == read_file(b);
}

bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
  auto names = [](const std::filesystem::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      out.push_back(e.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto na = names(a);
  if (na != names(b)) return false;
  return std::all_of(na.begin(), na.end(),
                     [&](const std::string& n) { return same_bytes(a / n, b / n); });
}

}  // namespace rsesf::testing
