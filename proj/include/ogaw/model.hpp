#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ogaw/oga.hpp"
#include "ogaw/ops.hpp"
#include "ogaw/parameter.hpp"

namespace ogaw {

struct ModelConfig {
  std::size_t image_size = 256;
  std::size_t in_channels = 3;
  std::size_t num_classes = 10;
  /// One stride-2 residual stage per entry.
  std::vector<std::size_t> encoder_widths{16, 32, 64, 128};
  std::vector<std::size_t> classifier_widths{16, 32};
  std::string wavelet_bank = "haar";
  std::size_t oga_kernel_size = 3;
  std::size_t oga_num_kernels = 4;
  std::size_t oga_reduction_ratio = 4;
  double recon_loss_weight = 0.0;

  std::size_t encoder_downsamples() const { return encoder_widths.size(); }
  std::size_t bottleneck_size() const { return image_size >> encoder_downsamples(); }
  /// J = log2(image_size / bottleneck_size).
  std::size_t wavelet_levels() const { return encoder_downsamples(); }
  OgaConfig oga() const;
  void validate() const;
};

/// Channel bookkeeping of the fusion point.
struct FusionPlan {
  std::size_t encoder_channels = 0;
  std::size_t dwt_channels = 0;  // LL, LH, HL, HH of level J per input channel
  std::size_t swt_channels = 0;  // same four planes, pooled to the bottleneck grid

  std::size_t fused_channels() const { return encoder_channels + dwt_channels + swt_channels; }
  std::string describe() const;

  static FusionPlan for_config(const ModelConfig& config);
};

/// Encoder -> OGA -> wavelet fusion -> decoder -> classifier.
///
/// The classifier reads the decoder's reconstruction. Wavelet channels are
/// computed from the input image and enter the graph as constants.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  FusionPlan fusion_plan() const { return FusionPlan::for_config(config_); }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  /// image[N,C,S,S] -> [N, widths.back(), S/2^stages, S/2^stages]
  Tensor encode(const Tensor& image, Mode mode);
  Tensor attention(const Tensor& features, const std::optional<AttentionSet>& forced = std::nullopt);
  /// Standardized level-J DWT and pooled SWT planes, [N, 8·C, s, s].
  Tensor wavelet_features(const Tensor& image) const;
  /// oga_out channels first, then the DWT planes, then the SWT planes.
  Tensor fuse(const Tensor& oga_out, const Tensor& image) const;
  /// [N,C_f,s,s] -> [N,C,S,S] in [0,1]
  Tensor decode(const Tensor& fused, Mode mode);
  /// [N,C,S,S] -> logits [N,num_classes]
  Tensor classify(const Tensor& recon) const;

  struct Output {
    Tensor logits, recon;
  };
  Output forward(const Tensor& image, Mode mode);

  struct Loss {
    Tensor total, cross_entropy;
    Tensor logits, recon;
  };
  /// cross_entropy(logits, labels) + recon_loss_weight · mse(recon, image)
  Loss forward_loss(const Tensor& image, std::span<const int> labels, Mode mode);

 private:
  struct ConvBn {
    Tensor weight, gamma, beta;
    std::size_t bn = 0;
    std::size_t stride = 1, padding = 0;
  };
  struct Residual {
    ConvBn conv1, conv2, shortcut;
  };
  struct Upsample {
    Tensor weight, gamma, beta;
    std::size_t bn = 0;
  };

  ConvBn make_conv_bn(const std::string& prefix, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                      Rng& rng);
  Tensor apply(const ConvBn& block, const Tensor& x, Mode mode);
  void check_image(const Tensor& image, const char* op) const;

  ModelConfig config_;
  ParameterStore store_;
  std::vector<BatchNormState> bn_states_;

  ConvBn stem_;
  std::vector<Residual> stages_;
  OgaParams oga_;
  std::vector<Upsample> ups_;
  Tensor out_weight_, out_bias_;
  std::vector<Tensor> cls_weights_, cls_biases_;
  Tensor fc_weight_, fc_bias_;
};

}  // namespace ogaw
