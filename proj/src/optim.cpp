#include "ogaw/optim.hpp"

#include <cmath>
#include <string>

#include "ogaw/error.hpp"

namespace ogaw {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train: epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("train: batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("train: learning_rate must be a finite non-negative number");
  }
  if (!(weight_decay >= 0.0)) throw ValidationError("train: weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("train: adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("train: adam epsilon must be positive");
}

void adam_step(Parameter& param, std::span<const double> grad, const TrainConfig& cfg) {
  auto theta = param.tensor.mutable_data();
  if (grad.size() != theta.size()) {
    throw DimensionError("adam_step: gradient for '" + param.name + "' has " + std::to_string(grad.size()) +
                         " elements, parameter has " + std::to_string(theta.size()));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericError("adam_step: non-finite gradient in parameter '" + param.name + "' at element " +
                         std::to_string(i));
    }
  }
  param.step_count += 1;
  const double t = static_cast<double>(param.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] + cfg.weight_decay * theta[i];
    param.adam_m[i] = cfg.beta1 * param.adam_m[i] + (1.0 - cfg.beta1) * g;
    param.adam_v[i] = cfg.beta2 * param.adam_v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = param.adam_m[i] / correction1;
    const double v_hat = param.adam_v[i] / correction2;
    theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

void adam_step_all(ParameterStore& store, const TrainConfig& cfg) {
  for (auto& p : store.parameters()) {
    if (!p.tensor.has_grad()) continue;
    adam_step(p, p.tensor.grad(), cfg);
  }
}

}  // namespace ogaw
