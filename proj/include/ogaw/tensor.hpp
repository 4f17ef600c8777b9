#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ogaw {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Copies share storage; ops never write into their inputs, so a tensor is
/// immutable once produced. Leaf tensors (parameters, gradcheck inputs) may
/// be edited through mutable_data() between passes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Same values, fresh storage, no gradient tracking.
  Tensor detach() const;
  bool all_finite() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Define-by-run record of differentiable ops.
///
/// Constructing a Tape makes it the active tape of the calling thread until it
/// is destroyed; ops executed meanwhile on inputs that require gradients are
/// appended in execution order. backward() replays them in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept;

  void record(std::string_view op, const Tensor& output, BackwardFn backward);

  /// Seeds d(root)/d(root) = 1 and propagates to every reachable tensor.
  void backward(const Tensor& root);

  std::size_t size() const noexcept { return entries_.size(); }
  /// Op names visited by the last backward(), in visiting order.
  const std::vector<std::string_view>& last_trace() const noexcept { return trace_; }

 private:
  struct Entry {
    std::string_view op;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };

  std::vector<Entry> entries_;
  std::vector<std::string_view> trace_;
  Tape* previous_ = nullptr;
};

/// When enabled, every op output is scanned and a NumericError names the op
/// that produced a NaN or Inf.
void set_finite_check(bool enabled) noexcept;
bool finite_check_enabled() noexcept;

namespace detail {

/// True when an active tape exists and any input requires a gradient.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(std::span<const Tensor> inputs);

/// Gradient buffer of t, allocated (zeroed) on first use.
std::vector<double>& grad_buffer(const Tensor& t);

/// Wraps freshly computed values as an op output and records the backward
/// closure when `track` is set.
Tensor finish(std::string_view op, Shape shape, std::vector<double> values, bool track,
              Tape::BackwardFn backward);

}  // namespace detail

}  // namespace ogaw
