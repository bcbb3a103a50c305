#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsesf/image.hpp"
#include "rsesf/net.hpp"
#include "rsesf/tensor.hpp"

namespace rsesf {

/// Gradients shaped like the trainable parameters of a Model.
struct GradientSet {
  std::vector<Tensor> d_alpha;               ///< per layer, [c_out, c_in, B]
  std::vector<std::vector<double>> d_logit;  ///< per layer, per scale group
  Tensor d_head_weights;
  Tensor d_head_bias;
  std::vector<double> d_eta_logits;

  static GradientSet zeros_like(const Model& model);
  void add(const GradientSet& other);
  void scale(double factor);
  bool all_finite() const;
};

struct FreezeFlags {
  bool alpha = false;
  bool sigma = false;
  bool head = false;
  bool eta = false;
};

enum class OptimizerKind { sgd, momentum };

struct TrainConfig {
  double step_size = 0.05;
  std::size_t steps = 100;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::momentum;
  double momentum = 0.9;
  FreezeFlags freeze;

  void validate() const;
};

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

/// Batch-mean loss and exact gradients. The model must have one rotation channel.
BackwardResult backward(std::span<const LabeledImage> batch, const Model& model,
                        const FreezeFlags& freeze = {});

/// Flat views over every trainable scalar, in a fixed order: alpha of each
/// layer, scale logits of each layer, head weights, head bias, eta logits.
std::vector<double> flatten_parameters(const Model& model);
void assign_parameters(Model& model, std::span<const double> flat);
std::vector<double> flatten_gradients(const GradientSet& grads);

/// Plain SGD update p <- p - step_size * g.
void step(Model& model, const GradientSet& grads, double step_size);

/// SGD with optional momentum (v <- mu v + g; p <- p - lr v).
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}
  void apply(Model& model, const GradientSet& grads);

 private:
  TrainConfig config_;
  std::vector<double> velocity_;
};

struct FitResult {
  Model model;
  std::vector<double> loss_trace;  ///< batch loss before each update
};

/// Deterministic mini-batch training; the sample order is reshuffled every
/// epoch from `config.seed`.
FitResult fit(std::span<const LabeledImage> dataset, Model model, const TrainConfig& config);

}  // namespace rsesf
