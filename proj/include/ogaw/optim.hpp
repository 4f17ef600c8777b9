#pragma once

#include <cstdint>
#include <span>

#include "ogaw/parameter.hpp"

namespace ogaw {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  bool shuffle = true;

  void validate() const;
};

/// One Adam update with coupled L2 regularization:
///   g = grad + weight_decay·θ
///   m = β1·m + (1-β1)·g,  v = β2·v + (1-β2)·g²
///   θ = θ - lr · m̂ / (sqrt(v̂) + ε)
/// where m̂, v̂ are bias-corrected with the incremented step count.
/// Throws NumericError naming the parameter on a non-finite gradient.
void adam_step(Parameter& param, std::span<const double> grad, const TrainConfig& cfg);

/// adam_step over every parameter that received a gradient.
void adam_step_all(ParameterStore& store, const TrainConfig& cfg);

}  // namespace ogaw
