#pragma once

// Equivariant segmentation network: gamma independent scale streams of
// steerable layers, relu after every layer, rotation reduction, a shared
// 1x1 head and a per-stream softmax.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsesf/conv.hpp"
#include "rsesf/filterbank.hpp"
#include "rsesf/image.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf {

struct ModelConfig {
  std::size_t input_channels = 1;
  std::vector<std::size_t> channels{4, 4};  ///< C^1 ... C^L
  int order = 2;
  /// gamma + 1 ascending edges shared by every layer; group k spans (e_k, e_{k+1}).
  std::vector<double> scale_edges{0.4, 0.8, 1.2, 1.6};
  std::size_t r_train = 1;
  std::size_t r_infer = 4;
  std::size_t classes = 2;
  HiddenMode hidden_mode = HiddenMode::steered_per_channel;
  RotationReduction reduction = RotationReduction::max;

  std::size_t depth() const noexcept { return channels.size(); }
  std::size_t gamma() const noexcept { return scale_edges.empty() ? 0 : scale_edges.size() - 1; }
  void validate() const;
};

/// 1x1 convolution from C^L channels to K class logits.
struct Head {
  Tensor weights;  ///< [K, C^L]
  Tensor bias;     ///< [K]

  bool operator==(const Head&) const = default;
};

/// Trainable scale importance: eta = softmax(logits), rectified = eta/2 + 1/(2 gamma).
struct ScaleWeights {
  std::vector<double> logits;

  std::vector<double> eta() const;
  std::vector<double> rectified() const;
  bool operator==(const ScaleWeights&) const = default;
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> rectified_weights(std::span<const double> logits);

struct Model {
  ModelConfig config;
  std::vector<FilterBank> layers;
  Head head;
  ScaleWeights scale_weights;

  std::size_t rotations() const { return layers.front().rotation.count; }
  std::size_t gamma() const { return layers.front().gamma(); }
  std::size_t classes() const { return head.bias.size(); }
};

/// Random model at config.r_train rotation channels.
Model make_model(const ModelConfig& config, std::uint64_t seed);

/// Every layer inflated to `rotations` channels; parameters untouched.
Model with_rotations(const Model& model, std::size_t rotations);

/// Filters of every layer (outer) and scale group (inner).
using MaterializedFilters = std::vector<std::vector<FilterTensor>>;
MaterializedFilters materialize_all(const Model& model);

/// Runs one scale stream. When `trace` is given it receives the post-relu
/// activations of every layer (trace->back() is the returned map).
FeatureMap forward_stream(const Tensor& image, const Model& model,
                          const MaterializedFilters& filters, std::size_t group,
                          std::vector<FeatureMap>* trace = nullptr);

/// Pre-head feature maps of every scale group, [C^L, R, H, W] each.
std::vector<FeatureMap> forward(const Tensor& image, const Model& model);
std::vector<FeatureMap> forward(const Tensor& image, const Model& model,
                                const MaterializedFilters& filters);

/// Per-pixel softmax of the head applied to an R = 1 feature map; [K, H, W].
Tensor head_and_softmax(const FeatureMap& fmap, const Head& head);

inline constexpr double kLogClip = 1e-12;

/// Mean over pixels of sum_k rectified_k * (-log p_k[true class]).
double loss(std::span<const Tensor> per_scale_probs, const LabelMap& target,
            const ScaleWeights& weights);

struct Prediction {
  std::vector<Tensor> per_scale_probs;  ///< gamma tensors [K, H, W]
  Tensor combined_probs;                ///< sum_k rectified_k * per_scale_probs[k]
  LabelMap label_map;
};

Prediction predict(const Tensor& image, const Model& model);
Prediction predict(const Tensor& image, const Model& model, RotationReduction reduction);
Prediction predict(const Tensor& image, const Model& model, const MaterializedFilters& filters,
                   RotationReduction reduction);

/// Per-pixel argmax over the leading axis (lowest index on ties).
LabelMap argmax_labels(const Tensor& probs);

/// Mean IoU over classes present in prediction or truth; `margin` pixels
/// along every border are ignored.
double miou(const LabelMap& predicted, const LabelMap& truth, std::size_t classes,
            std::size_t margin = 0);

std::string to_string(HiddenMode mode);
std::string to_string(RotationReduction reduction);
HiddenMode parse_hidden_mode(const std::string& name);
RotationReduction parse_reduction(const std::string& name);

}  // namespace rsesf
