#pragma once

#include <span>
#include <vector>

#include "ogaw/tensor.hpp"

namespace ogaw {

// Elementwise arithmetic; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Softmax along `axis`; every slice along that axis sums to one.
Tensor softmax(const Tensor& x, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Same values under a new shape of equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// x[N,F] · weight[F,G] + bias[G]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// [N,C,H,W] -> [N,C]
Tensor global_avg_pool(const Tensor& x);
/// Non-overlapping factor×factor averaging; H and W must be divisible by factor.
Tensor avg_pool2d(const Tensor& x, std::size_t factor);
/// 2×2 window, stride 2; ties resolve to the first element in row-major order.
Tensor maxpool2d(const Tensor& x);

/// Concatenates [N,Ci,H,W] inputs along the channel axis.
Tensor concat_channels(std::span<const Tensor> inputs);
/// Channels [begin, end) of x[N,C,H,W].
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end);

/// Running statistics owned by the caller and updated in training mode.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t channels = 1);
};

enum class Mode { Train, Eval };

/// Per-channel normalization of x[N,C,H,W] followed by gamma/beta affine.
/// Train mode normalizes with biased batch statistics and folds the batch
/// mean and unbiased variance into `state`; eval mode uses `state`.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode);

/// Mean over the batch of -log softmax(logits)[label], max-shifted.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Mean squared difference; `target` is treated as a constant.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

// Convolutions are cross-correlations with zero padding.

/// input[N,Cin,H,W] ⋆ weight[Cout,Cin,k,k] (+ bias[Cout]) -> [N,Cout,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// Sample i is convolved with weights[i]; weights is [N,Cout,Cin,k,k].
Tensor conv2d_per_sample(const Tensor& input, const Tensor& weights, const Tensor& bias, std::size_t stride,
                         std::size_t padding);

/// Adjoint of conv2d w.r.t. its input: input[N,Cin,H,W], weight[Cin,Cout,k,k]
/// -> [N,Cout,(H-1)·stride-2·padding+k, ...].
Tensor transposed_conv2d(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t padding);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

}  // namespace ogaw
