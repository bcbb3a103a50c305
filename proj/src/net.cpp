#include "rsesf/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rsesf/error.hpp"

namespace rsesf {

void ModelConfig::validate() const {
  if (input_channels != 1 && input_channels != 3) {
    throw ArgumentError("input_channels must be 1 or 3");
  }
  if (channels.size() < 2) throw ArgumentError("network depth must be at least 2");
  for (auto c : channels) {
    if (c == 0) throw ArgumentError("every layer needs at least one channel");
  }
  if (order != 1 && order != 2) throw ArgumentError("basis order must be 1 or 2");
  if (gamma() < 1) throw ArgumentError("at least one scale group is required");
  make_scale_groups(scale_edges);
  if (r_train < 1 || r_infer < r_train) throw ArgumentError("need 1 <= r_train <= r_infer");
  if (classes < 2) throw ArgumentError("at least two classes are required");
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (auto& v : out) {
    v = std::exp(v - m);
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

std::vector<double> rectified_weights(std::span<const double> logits) {
  auto eta = softmax(logits);
  const double floor = 1.0 / (2.0 * static_cast<double>(eta.size()));
  const double ceiling = 0.5 + floor;
  for (auto& v : eta) {
    v = 0.5 * v + floor;
    // A saturated softmax would land exactly on the open interval's ends.
    if (eta.size() > 1) v = std::clamp(v, std::nextafter(floor, 1.0), std::nextafter(ceiling, 0.0));
  }
  return eta;
}

std::vector<double> ScaleWeights::eta() const { return softmax(logits); }
std::vector<double> ScaleWeights::rectified() const { return rectified_weights(logits); }

Model make_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Model model;
  model.config = config;
  std::size_t c_in = config.input_channels;
  for (std::size_t l = 0; l < config.depth(); ++l) {
    model.layers.push_back(make_filter_bank(static_cast<int>(l + 1), config.channels[l], c_in,
                                            config.order, make_scale_groups(config.scale_edges),
                                            RotationScheme{config.r_train}, rng));
    c_in = config.channels[l];
  }
  model.head.weights = Tensor({config.classes, c_in});
  model.head.bias = Tensor({config.classes});
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in));
  for (auto& w : model.head.weights.values()) w = (2.0 * uniform01(rng) - 1.0) * bound;
  model.scale_weights.logits.assign(config.gamma(), 0.0);
  return model;
}

Model with_rotations(const Model& model, std::size_t rotations) {
  Model out = model;
  for (auto& layer : out.layers) layer = inflate_rotations(layer, rotations);
  return out;
}

MaterializedFilters materialize_all(const Model& model) {
  MaterializedFilters out;
  for (const auto& layer : model.layers) {
    std::vector<FilterTensor> per_group;
    for (std::size_t k = 0; k < layer.gamma(); ++k) per_group.push_back(materialize(layer, k));
    out.push_back(std::move(per_group));
  }
  return out;
}

FeatureMap forward_stream(const Tensor& image, const Model& model,
                          const MaterializedFilters& filters, std::size_t group,
                          std::vector<FeatureMap>* trace) {
  if (image.rank() != 3 || image.dim(0) != model.config.input_channels) {
    throw ShapeError("image must be [" + std::to_string(model.config.input_channels) + ", H, W]");
  }
  if (filters.size() != model.layers.size()) throw ShapeError("filters do not match model depth");
  FeatureMap fmap = relu(first_layer_forward(image, filters[0].at(group)));
  fmap.scale_group = group;
  if (trace) trace->push_back(fmap);
  for (std::size_t l = 1; l < filters.size(); ++l) {
    fmap = relu(hidden_layer_forward(fmap, filters[l].at(group), model.config.hidden_mode));
    if (trace) trace->push_back(fmap);
  }
  return fmap;
}

std::vector<FeatureMap> forward(const Tensor& image, const Model& model) {
  return forward(image, model, materialize_all(model));
}

std::vector<FeatureMap> forward(const Tensor& image, const Model& model,
                                const MaterializedFilters& filters) {
  std::vector<FeatureMap> out;
  for (std::size_t k = 0; k < model.gamma(); ++k) {
    out.push_back(forward_stream(image, model, filters, k));
  }
  return out;
}

Tensor head_and_softmax(const FeatureMap& fmap, const Head& head) {
  if (fmap.rotations() != 1) throw ShapeError("head expects a single rotation channel");
  const std::size_t k_count = head.weights.dim(0);
  const std::size_t c_count = head.weights.dim(1);
  if (fmap.channels() != c_count) throw ShapeError("head channel count mismatch");
  const std::size_t area = fmap.height() * fmap.width();
  Tensor probs({k_count, fmap.height(), fmap.width()});
  auto out = probs.values();
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t p = 0; p < area; ++p) out[k * area + p] = head.bias[k];
    for (std::size_t c = 0; c < c_count; ++c) {
      const double w = head.weights(k, c);
      const auto f = fmap.values.slab({c, 0});
      for (std::size_t p = 0; p < area; ++p) out[k * area + p] += w * f[p];
    }
  }
  for (std::size_t p = 0; p < area; ++p) {
    double m = out[p];
    for (std::size_t k = 1; k < k_count; ++k) m = std::max(m, out[k * area + p]);
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      out[k * area + p] = std::exp(out[k * area + p] - m);
      total += out[k * area + p];
    }
    for (std::size_t k = 0; k < k_count; ++k) out[k * area + p] /= total;
  }
  return probs;
}

double loss(std::span<const Tensor> per_scale_probs, const LabelMap& target,
            const ScaleWeights& weights) {
  if (per_scale_probs.size() != weights.logits.size()) {
    throw ShapeError("one probability map per scale group is required");
  }
  const auto eta = weights.rectified();
  const std::size_t area = target.size();
  double total = 0.0;
  for (std::size_t k = 0; k < per_scale_probs.size(); ++k) {
    const auto& probs = per_scale_probs[k];
    if (probs.rank() != 3 || probs.dim(1) != target.height || probs.dim(2) != target.width) {
      throw ShapeError("probability map does not match target");
    }
    const auto k_count = static_cast<int>(probs.dim(0));
    double ce = 0.0;
    for (std::size_t p = 0; p < area; ++p) {
      const int y = target.labels[p];
      if (y < 0 || y >= k_count) throw ArgumentError("label out of range: " + std::to_string(y));
      ce -= std::log(std::max(probs[static_cast<std::size_t>(y) * area + p], kLogClip));
    }
    total += eta[k] * ce;
  }
  return total / static_cast<double>(area);
}

LabelMap argmax_labels(const Tensor& probs) {
  const std::size_t k_count = probs.dim(0);
  const std::size_t h = probs.dim(1);
  const std::size_t w = probs.dim(2);
  const std::size_t area = h * w;
  LabelMap out(h, w);
  for (std::size_t p = 0; p < area; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < k_count; ++k) {
      if (probs[k * area + p] > probs[best * area + p]) best = k;
    }
    out.labels[p] = static_cast<int>(best);
  }
  return out;
}

Prediction predict(const Tensor& image, const Model& model) {
  return predict(image, model, model.config.reduction);
}

Prediction predict(const Tensor& image, const Model& model, RotationReduction reduction) {
  return predict(image, model, materialize_all(model), reduction);
}

Prediction predict(const Tensor& image, const Model& model, const MaterializedFilters& filters,
                   RotationReduction reduction) {
  Prediction pred;
  const auto eta = model.scale_weights.rectified();
  for (std::size_t k = 0; k < model.gamma(); ++k) {
    const auto fmap = forward_stream(image, model, filters, k);
    auto probs = head_and_softmax(reduce_rotations(fmap, reduction), model.head);
    if (k == 0) pred.combined_probs = Tensor(probs.shape());
    auto combined = pred.combined_probs.values();
    const auto src = probs.values();
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] += eta[k] * src[i];
    pred.per_scale_probs.push_back(std::move(probs));
  }
  pred.label_map = argmax_labels(pred.combined_probs);
  return pred;
}

double miou(const LabelMap& predicted, const LabelMap& truth, std::size_t classes,
            std::size_t margin) {
  if (predicted.height != truth.height || predicted.width != truth.width) {
    throw ShapeError("miou: label maps differ in shape");
  }
  if (2 * margin >= truth.height || 2 * margin >= truth.width) {
    throw ArgumentError("miou: margin leaves no pixels");
  }
  std::vector<std::size_t> inter(classes, 0);
  std::vector<std::size_t> uni(classes, 0);
  for (std::size_t r = margin; r + margin < truth.height; ++r) {
    for (std::size_t c = margin; c + margin < truth.width; ++c) {
      const int p = predicted.at(r, c);
      const int t = truth.at(r, c);
      if (p < 0 || t < 0 || p >= static_cast<int>(classes) || t >= static_cast<int>(classes)) {
        throw ArgumentError("miou: label out of range");
      }
      if (p == t) {
        ++inter[static_cast<std::size_t>(p)];
        ++uni[static_cast<std::size_t>(p)];
      } else {
        ++uni[static_cast<std::size_t>(p)];
        ++uni[static_cast<std::size_t>(t)];
      }
    }
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (uni[k] == 0) continue;
    total += static_cast<double>(inter[k]) / static_cast<double>(uni[k]);
    ++present;
  }
  return present == 0 ? 1.0 : total / static_cast<double>(present);
}

std::string to_string(HiddenMode mode) {
  return mode == HiddenMode::steered_per_channel ? "steered" : "summed";
}

std::string to_string(RotationReduction reduction) {
  switch (reduction) {
    case RotationReduction::max: return "max";
    case RotationReduction::unified: return "unified";
    case RotationReduction::per_channel: return "per_channel";
  }
  return "max";
}

HiddenMode parse_hidden_mode(const std::string& name) {
  if (name == "steered") return HiddenMode::steered_per_channel;
  if (name == "summed") return HiddenMode::summed_orientations;
  throw ArgumentError("unknown hidden mode '" + name + "' (expected steered|summed)");
}

RotationReduction parse_reduction(const std::string& name) {
  if (name == "max") return RotationReduction::max;
  if (name == "unified") return RotationReduction::unified;
  if (name == "per_channel") return RotationReduction::per_channel;
  throw ArgumentError("unknown reduction '" + name + "' (expected max|unified|per_channel)");
}

}  // namespace rsesf
