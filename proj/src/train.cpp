#include "rsesf/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "rsesf/error.hpp"

namespace rsesf {

GradientSet GradientSet::zeros_like(const Model& model) {
  GradientSet g;
  for (const auto& layer : model.layers) {
    g.d_alpha.emplace_back(layer.alpha.shape());
    g.d_logit.emplace_back(layer.gamma(), 0.0);
  }
  g.d_head_weights = Tensor(model.head.weights.shape());
  g.d_head_bias = Tensor(model.head.bias.shape());
  g.d_eta_logits.assign(model.scale_weights.logits.size(), 0.0);
  return g;
}

void GradientSet::add(const GradientSet& other) {
  for (std::size_t l = 0; l < d_alpha.size(); ++l) {
    auto dst = d_alpha[l].values();
    const auto src = other.d_alpha[l].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    for (std::size_t k = 0; k < d_logit[l].size(); ++k) d_logit[l][k] += other.d_logit[l][k];
  }
  for (std::size_t i = 0; i < d_head_weights.size(); ++i) d_head_weights[i] += other.d_head_weights[i];
  for (std::size_t i = 0; i < d_head_bias.size(); ++i) d_head_bias[i] += other.d_head_bias[i];
  for (std::size_t i = 0; i < d_eta_logits.size(); ++i) d_eta_logits[i] += other.d_eta_logits[i];
}

void GradientSet::scale(double factor) {
  for (auto& t : d_alpha) {
    for (auto& v : t.values()) v *= factor;
  }
  for (auto& per_group : d_logit) {
    for (auto& v : per_group) v *= factor;
  }
  for (auto& v : d_head_weights.values()) v *= factor;
  for (auto& v : d_head_bias.values()) v *= factor;
  for (auto& v : d_eta_logits) v *= factor;
}

bool GradientSet::all_finite() const {
  const auto flat = flatten_gradients(*this);
  return std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); });
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0)) throw ArgumentError("step size must be positive");
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must be in [0, 1)");
}

namespace {

// Basis grids and their sigma-derivatives for one (layer, group), R = 1.
struct LayerBasis {
  std::vector<KernelGrid> grids;
  std::vector<KernelGrid> dgrids;
};

struct BatchContext {
  MaterializedFilters filters;
  std::vector<std::vector<LayerBasis>> basis;  // [layer][group]
};

BatchContext prepare(const Model& model) {
  BatchContext ctx{materialize_all(model), {}};
  for (const auto& layer : model.layers) {
    std::vector<LayerBasis> per_group;
    for (std::size_t k = 0; k < layer.gamma(); ++k) {
      per_group.push_back({steered_basis(layer, k, 0), steered_basis_dsigma(layer, k, 0)});
    }
    ctx.basis.push_back(std::move(per_group));
  }
  return ctx;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Loss and (unnormalized-by-batch) gradients of a single sample.
BackwardResult backward_one(const LabeledImage& sample, const Model& model,
                            const BatchContext& ctx) {
  const std::size_t gamma = model.gamma();
  const std::size_t depth = model.layers.size();
  const std::size_t h = sample.image.dim(1);
  const std::size_t w = sample.image.dim(2);
  const std::size_t area = h * w;
  if (sample.mask.height != h || sample.mask.width != w) {
    throw ShapeError("mask does not match image size");
  }
  const std::size_t k_count = model.classes();
  const std::size_t c_last = model.head.weights.dim(1);
  const auto eta = model.scale_weights.eta();
  const auto rect = model.scale_weights.rectified();
  const double inv_area = 1.0 / static_cast<double>(area);

  BackwardResult result{0.0, GradientSet::zeros_like(model)};
  auto& g = result.grads;
  std::vector<double> ce_per_scale(gamma, 0.0);

  for (std::size_t k = 0; k < gamma; ++k) {
    std::vector<FeatureMap> trace;
    forward_stream(sample.image, model, ctx.filters, k, &trace);
    for (std::size_t l = 0; l < depth; ++l) {
      if (!trace[l].values.all_finite()) {
        throw NumericError("non-finite activation in layer " + std::to_string(l + 1) +
                           ", scale group " + std::to_string(k));
      }
    }
    const FeatureMap& features = trace.back();
    const Tensor probs = head_and_softmax(features, model.head);
    if (!probs.all_finite()) {
      throw NumericError("non-finite probabilities in scale group " + std::to_string(k));
    }

    // d loss / d logits for this stream, scaled by rect[k] / area.
    Tensor dlogits(probs.shape());
    for (std::size_t p = 0; p < area; ++p) {
      const int y = sample.mask.labels[p];
      if (y < 0 || y >= static_cast<int>(k_count)) {
        throw ArgumentError("label out of range: " + std::to_string(y));
      }
      const double p_true = probs[static_cast<std::size_t>(y) * area + p];
      ce_per_scale[k] -= std::log(std::max(p_true, kLogClip));
      if (p_true < kLogClip) continue;  // clipped: flat in every parameter
      for (std::size_t c = 0; c < k_count; ++c) {
        const double onehot = static_cast<int>(c) == y ? 1.0 : 0.0;
        dlogits[c * area + p] = rect[k] * inv_area * (probs[c * area + p] - onehot);
      }
    }

    // Head.
    Tensor dfeat({c_last, 1, h, w});
    for (std::size_t c = 0; c < k_count; ++c) {
      const auto dl = dlogits.slab({c});
      g.d_head_bias[c] += std::accumulate(dl.begin(), dl.end(), 0.0);
      for (std::size_t d = 0; d < c_last; ++d) {
        g.d_head_weights(c, d) += dot(dl, features.values.slab({d, 0}));
        const double wcd = model.head.weights(c, d);
        auto df = dfeat.slab({d, 0});
        for (std::size_t p = 0; p < area; ++p) df[p] += wcd * dl[p];
      }
    }

    // Equivariant layers, last to first.
    Tensor dpost = std::move(dfeat);
    double dsigma = 0.0;
    for (std::size_t l = depth; l-- > 0;) {
      const FilterBank& bank = model.layers[l];
      const FilterTensor& filt = ctx.filters[l][k];
      const LayerBasis& basis = ctx.basis[l][k];
      const std::size_t ext = filt.extent();
      const Tensor& post = trace[l].values;
      const bool first = l == 0;
      const std::size_t c_in = bank.c_in;

      Tensor dpre = std::move(dpost);
      for (std::size_t i = 0; i < dpre.size(); ++i) {
        if (!(post[i] > 0.0)) dpre[i] = 0.0;
      }
      Tensor din = first ? Tensor{} : Tensor({c_in, 1, h, w});
      Tensor dkernel({ext, ext});
      for (std::size_t c = 0; c < bank.c_out; ++c) {
        const auto dplane = dpre.slab({c, 0});
        for (std::size_t d = 0; d < c_in; ++d) {
          const auto in_plane = first ? sample.image.slab({d}) : trace[l - 1].values.slab({d, 0});
          dkernel.fill(0.0);
          // Summed mode with R = 1 uses the same single filter slice.
          correlate_kernel_gradient(in_plane, dplane, h, w, ext, dkernel.values());
          if (!first) {
            correlate_adjoint_accumulate(dplane, h, w, filt.values.slab({c, d, 0}), ext,
                                         din.slab({d, 0}));
          }
          const auto coeffs = bank.alpha.slab({c, d});
          auto dalpha = g.d_alpha[l].slab({c, d});
          for (std::size_t b = 0; b < coeffs.size(); ++b) {
            dalpha[b] += dot(dkernel.values(), basis.grids[b].values());
            dsigma += coeffs[b] * dot(dkernel.values(), basis.dgrids[b].values());
          }
        }
      }
      g.d_logit[l][k] += dsigma * bank.scale_groups[k].dsigma_dlogit();
      dsigma = 0.0;
      dpost = std::move(din);
    }
  }

  for (std::size_t k = 0; k < gamma; ++k) {
    ce_per_scale[k] *= inv_area;
    result.loss += rect[k] * ce_per_scale[k];
  }
  // d loss / d eta_j through rect = eta/2 + const and the softmax Jacobian.
  double weighted = 0.0;
  for (std::size_t k = 0; k < gamma; ++k) weighted += eta[k] * 0.5 * ce_per_scale[k];
  for (std::size_t j = 0; j < gamma; ++j) {
    g.d_eta_logits[j] = eta[j] * (0.5 * ce_per_scale[j] - weighted);
  }
  return result;
}

void zero_frozen(GradientSet& g, const FreezeFlags& freeze) {
  if (freeze.alpha) {
    for (auto& t : g.d_alpha) t.fill(0.0);
  }
  if (freeze.sigma) {
    for (auto& v : g.d_logit) std::fill(v.begin(), v.end(), 0.0);
  }
  if (freeze.head) {
    g.d_head_weights.fill(0.0);
    g.d_head_bias.fill(0.0);
  }
  if (freeze.eta) std::fill(g.d_eta_logits.begin(), g.d_eta_logits.end(), 0.0);
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += workers) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

BackwardResult backward(std::span<const LabeledImage> batch, const Model& model,
                        const FreezeFlags& freeze) {
  if (batch.empty()) throw ArgumentError("backward needs a non-empty batch");
  if (model.rotations() != 1) {
    throw ArgumentError("training uses a single rotation channel; got R = " +
                        std::to_string(model.rotations()));
  }
  const BatchContext ctx = prepare(model);
  std::vector<BackwardResult> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { parts[i] = backward_one(batch[i], model, ctx); });

  BackwardResult total{0.0, GradientSet::zeros_like(model)};
  for (const auto& part : parts) {
    total.loss += part.loss;
    total.grads.add(part.grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  total.grads.scale(inv);
  if (!std::isfinite(total.loss)) throw NumericError("non-finite loss");
  zero_frozen(total.grads, freeze);
  return total;
}

std::vector<double> flatten_parameters(const Model& model) {
  std::vector<double> flat;
  for (const auto& layer : model.layers) {
    flat.insert(flat.end(), layer.alpha.values().begin(), layer.alpha.values().end());
  }
  for (const auto& layer : model.layers) {
    for (const auto& group : layer.scale_groups) flat.push_back(group.logit());
  }
  flat.insert(flat.end(), model.head.weights.values().begin(), model.head.weights.values().end());
  flat.insert(flat.end(), model.head.bias.values().begin(), model.head.bias.values().end());
  flat.insert(flat.end(), model.scale_weights.logits.begin(), model.scale_weights.logits.end());
  return flat;
}

void assign_parameters(Model& model, std::span<const double> flat) {
  std::size_t pos = 0;
  auto take = [&](std::span<double> dst) {
    if (pos + dst.size() > flat.size()) throw ShapeError("parameter vector too short");
    std::copy_n(flat.begin() + static_cast<long>(pos), dst.size(), dst.begin());
    pos += dst.size();
  };
  for (auto& layer : model.layers) take(layer.alpha.values());
  for (auto& layer : model.layers) {
    for (auto& group : layer.scale_groups) {
      if (pos >= flat.size()) throw ShapeError("parameter vector too short");
      group.set_logit(flat[pos++]);
    }
  }
  take(model.head.weights.values());
  take(model.head.bias.values());
  take(model.scale_weights.logits);
  if (pos != flat.size()) throw ShapeError("parameter vector too long");
}

std::vector<double> flatten_gradients(const GradientSet& grads) {
  std::vector<double> flat;
  for (const auto& t : grads.d_alpha) flat.insert(flat.end(), t.values().begin(), t.values().end());
  for (const auto& v : grads.d_logit) flat.insert(flat.end(), v.begin(), v.end());
  flat.insert(flat.end(), grads.d_head_weights.values().begin(), grads.d_head_weights.values().end());
  flat.insert(flat.end(), grads.d_head_bias.values().begin(), grads.d_head_bias.values().end());
  flat.insert(flat.end(), grads.d_eta_logits.begin(), grads.d_eta_logits.end());
  return flat;
}

void step(Model& model, const GradientSet& grads, double step_size) {
  auto params = flatten_parameters(model);
  const auto g = flatten_gradients(grads);
  if (g.size() != params.size()) throw ShapeError("gradient set does not match model");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step_size * g[i];
  assign_parameters(model, params);
}

void Optimizer::apply(Model& model, const GradientSet& grads) {
  if (config_.optimizer == OptimizerKind::sgd) {
    step(model, grads, config_.step_size);
    return;
  }
  auto params = flatten_parameters(model);
  const auto g = flatten_gradients(grads);
  if (velocity_.empty()) velocity_.assign(g.size(), 0.0);
  if (g.size() != params.size() || velocity_.size() != g.size()) {
    throw ShapeError("gradient set does not match model");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = config_.momentum * velocity_[i] + g[i];
    params[i] -= config_.step_size * velocity_[i];
  }
  assign_parameters(model, params);
}

FitResult fit(std::span<const LabeledImage> dataset, Model model, const TrainConfig& config) {
  config.validate();
  FitResult result{std::move(model), {}};
  if (config.steps == 0) return result;
  if (dataset.empty()) throw ArgumentError("fit needs at least one sample");
  if (result.model.rotations() != 1) throw ArgumentError("fit expects R_train = 1");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::size_t cursor = order.size();
  auto reshuffle = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    cursor = 0;
  };

  Optimizer optimizer(config);
  const std::size_t batch_size = std::min(config.batch_size, dataset.size());
  std::vector<LabeledImage> batch;
  for (std::size_t s = 0; s < config.steps; ++s) {
    batch.clear();
    while (batch.size() < batch_size) {
      if (cursor == order.size()) reshuffle();
      batch.push_back(dataset[order[cursor++]]);
    }
    const auto bw = backward(batch, result.model, config.freeze);
    result.loss_trace.push_back(bw.loss);
    optimizer.apply(result.model, bw.grads);
  }
  return result;
}

}  // namespace rsesf
