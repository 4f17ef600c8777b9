#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ogaw/rng.hpp"
#include "ogaw/tensor.hpp"

namespace ogaw {

/// A trainable tensor together with its Adam state.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> adam_m, adam_v;
  std::uint64_t step_count = 0;

  Parameter(std::string name, Tensor value);
};

/// Names must match [a-z0-9_.]+.
bool valid_parameter_name(std::string_view name);

/// Ordered registry of a model's parameters and non-trainable buffers
/// (batchnorm running statistics). Registration order is the checkpoint order.
class ParameterStore {
 public:
  Tensor& add_parameter(const std::string& name, Tensor value);
  void add_buffer(const std::string& name, Tensor value);

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& buffers() const { return buffers_; }

  Parameter& parameter(std::string_view name);
  const Parameter& parameter(std::string_view name) const;
  /// Parameter or buffer tensor by name.
  Tensor tensor(std::string_view name) const;
  bool contains(std::string_view name) const;

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  void claim(const std::string& name);

  std::vector<Parameter> params_;
  std::vector<std::pair<std::string, Tensor>> buffers_;
  std::set<std::string, std::less<>> names_;  // both kinds
};

/// Kaiming-uniform fan-in initialization: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace ogaw
