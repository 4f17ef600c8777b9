#include "ogaw/parameter.hpp"

#include <cmath>

#include "ogaw/error.hpp"

namespace ogaw {

Parameter::Parameter(std::string n, Tensor value) : name(std::move(n)), tensor(std::move(value)) {
  tensor.set_requires_grad(true);
  adam_m.assign(tensor.numel(), 0.0);
  adam_v.assign(tensor.numel(), 0.0);
}

bool valid_parameter_name(std::string_view name) {
  if (name.empty()) return false;
  for (char ch : name) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') || ch == '_' || ch == '.';
    if (!ok) return false;
  }
  return true;
}

void ParameterStore::claim(const std::string& name) {
  if (!valid_parameter_name(name)) throw ValidationError("invalid parameter name '" + name + "'");
  if (names_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
}

Tensor& ParameterStore::add_parameter(const std::string& name, Tensor value) {
  claim(name);
  names_.insert(name);
  params_.emplace_back(name, std::move(value));
  return params_.back().tensor;
}

void ParameterStore::add_buffer(const std::string& name, Tensor value) {
  claim(name);
  names_.insert(name);
  buffers_.emplace_back(name, std::move(value));
}

Parameter& ParameterStore::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

const Parameter& ParameterStore::parameter(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->parameter(name);
}

Tensor ParameterStore::tensor(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  for (const auto& [n, t] : buffers_) {
    if (n == name) return t;
  }
  throw ValidationError("no parameter or buffer named '" + std::string(name) + "'");
}

bool ParameterStore::contains(std::string_view name) const { return names_.find(name) != names_.end(); }

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.numel();
  return total;
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace ogaw
