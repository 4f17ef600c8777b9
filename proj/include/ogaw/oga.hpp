#pragma once

#include <optional>
#include <string>

#include "ogaw/parameter.hpp"
#include "ogaw/tensor.hpp"

namespace ogaw {

/// Omni-dimensional gated attention block hyperparameters.
struct OgaConfig {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t kernel_size = 3;
  std::size_t num_kernels = 4;
  std::size_t reduction_ratio = 4;

  std::size_t hidden() const;
  /// Throws ValidationError on non-positive fields or an even kernel size.
  void validate() const;
};

/// The four attentions for a batch; row i belongs to sample i.
///   spatial [N,k,k], channel [N,c_in], filter [N,c_out] in (0,1);
///   kernel [N,n] on the probability simplex.
struct AttentionSet {
  Tensor spatial, channel, filter, kernel;

  std::size_t batch() const { return kernel.dim(0); }

  /// Open gates (all ones) and a one-hot kernel choice; a test hook that
  /// reduces the block to a static convolution with bank kernel `index`.
  static AttentionSet identity(const OgaConfig& config, std::size_t batch, std::size_t index);
};

/// Attention generator (pool -> bottleneck -> four heads) and kernel bank.
struct OgaParams {
  Tensor fc_weight, fc_bias;            // [c_in,hidden], [hidden]
  Tensor spatial_weight, spatial_bias;  // [hidden,k*k], [k*k]
  Tensor channel_weight, channel_bias;  // [hidden,c_in], [c_in]
  Tensor filter_weight, filter_bias;    // [hidden,c_out], [c_out]
  Tensor kernel_weight, kernel_bias;    // [hidden,n], [n]
  Tensor bank;                          // [n,c_out,c_in,k,k]
  Tensor bias;                          // [c_out]

  /// Kaiming-uniform weights, zero biases.
  static OgaParams init(const OgaConfig& config, Rng& rng);
  /// Registers every tensor under `prefix` and returns handles to the stored copies.
  OgaParams registered(ParameterStore& store, const std::string& prefix) const;
};

/// Generates per-sample attentions from features[N,c_in,H,W].
AttentionSet attend(const Tensor& features, const OgaConfig& config, const OgaParams& params);

/// Per-sample dynamic kernel
///   W[b] = sum_i kernel[b,i] * (spatial[b] ⊙ channel[b] ⊙ filter[b] ⊙ bank[i]),
/// returned as [N,c_out,c_in,k,k].
Tensor aggregate_kernel(const AttentionSet& attention, const Tensor& bank);

/// attend -> aggregate_kernel -> same-size per-sample convolution + bias.
/// `forced` replaces the generated attentions (test hook).
Tensor oga_forward(const Tensor& features, const OgaConfig& config, const OgaParams& params,
                   const std::optional<AttentionSet>& forced = std::nullopt);

}  // namespace ogaw
