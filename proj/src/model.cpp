#include "ogaw/model.hpp"

#include <cmath>
#include <sstream>

#include "ogaw/error.hpp"
#include "ogaw/wavelet.hpp"

namespace ogaw {

namespace {

constexpr std::size_t kUpsampleKernel = 4;
constexpr double kPlaneEps = 1e-6;

}  // namespace

OgaConfig ModelConfig::oga() const {
  OgaConfig c;
  c.c_in = encoder_widths.empty() ? 0 : encoder_widths.back();
  c.c_out = c.c_in;
  c.kernel_size = oga_kernel_size;
  c.num_kernels = oga_num_kernels;
  c.reduction_ratio = oga_reduction_ratio;
  return c;
}

void ModelConfig::validate() const {
  if (encoder_widths.empty()) throw ValidationError("model: encoder_widths must name at least one stage");
  for (auto w : encoder_widths)
    if (w == 0) throw ValidationError("model: encoder widths must be positive");
  if (classifier_widths.size() != 2 || classifier_widths[0] == 0 || classifier_widths[1] == 0) {
    throw ValidationError("model: classifier_widths must hold two positive widths");
  }
  if (in_channels == 0) throw ValidationError("model: in_channels must be positive");
  if (num_classes < 2) throw ValidationError("model: num_classes must be at least 2");
  const std::size_t divisor = std::size_t{1} << encoder_downsamples();
  if (image_size == 0 || image_size % divisor != 0) {
    throw ValidationError("model: image_size " + std::to_string(image_size) + " must be divisible by " +
                          std::to_string(divisor));
  }
  if (image_size < 4) throw ValidationError("model: image_size must be at least 4 for the classifier head");
  if (!(recon_loss_weight >= 0.0)) throw ValidationError("model: recon_loss_weight must be non-negative");
  const auto& bank = wavelet::FilterBank::by_name(wavelet_bank);
  if (2 * bottleneck_size() < bank.length()) {
    throw ValidationError("model: bottleneck " + std::to_string(bottleneck_size()) + " too small for the " +
                          bank.name + " filter at level " + std::to_string(wavelet_levels()));
  }
  oga().validate();
}

std::string FusionPlan::describe() const {
  std::ostringstream out;
  out << "FusionPlan{encoder=" << encoder_channels << ", dwt=" << dwt_channels << ", swt=" << swt_channels
      << ", fused=" << fused_channels() << "}";
  return out.str();
}

FusionPlan FusionPlan::for_config(const ModelConfig& config) {
  FusionPlan plan;
  plan.encoder_channels = config.encoder_widths.empty() ? 0 : config.encoder_widths.back();
  plan.dwt_channels = config.in_channels * 4;
  plan.swt_channels = config.in_channels * 4;
  return plan;
}

Model::ConvBn Model::make_conv_bn(const std::string& prefix, std::size_t in, std::size_t out, std::size_t k,
                                  std::size_t stride, Rng& rng) {
  ConvBn block;
  block.weight = store_.add_parameter(prefix + ".conv.weight", kaiming_uniform({out, in, k, k}, in * k * k, rng));
  block.gamma = store_.add_parameter(prefix + ".bn.gamma", Tensor(Shape{out}, 1.0));
  block.beta = store_.add_parameter(prefix + ".bn.beta", Tensor(Shape{out}, 0.0));
  block.bn = bn_states_.size();
  bn_states_.emplace_back(out);
  store_.add_buffer(prefix + ".bn.running_mean", bn_states_.back().running_mean);
  store_.add_buffer(prefix + ".bn.running_var", bn_states_.back().running_var);
  block.stride = stride;
  block.padding = k / 2;
  return block;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const auto& widths = config_.encoder_widths;

  stem_ = make_conv_bn("encoder.stem", config_.in_channels, widths[0], 3, 1, rng);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t in = i == 0 ? widths[0] : widths[i - 1];
    const std::string prefix = "encoder.stage" + std::to_string(i);
    Residual r;
    r.conv1 = make_conv_bn(prefix + ".conv1", in, widths[i], 3, 2, rng);
    r.conv2 = make_conv_bn(prefix + ".conv2", widths[i], widths[i], 3, 1, rng);
    r.shortcut = make_conv_bn(prefix + ".shortcut", in, widths[i], 1, 2, rng);
    stages_.push_back(std::move(r));
  }

  oga_ = OgaParams::init(config_.oga(), rng).registered(store_, "oga");

  std::size_t in = fusion_plan().fused_channels();
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t out = widths[widths.size() - 1 - i];
    const std::string prefix = "decoder.up" + std::to_string(i);
    Upsample u;
    u.weight = store_.add_parameter(
        prefix + ".weight", kaiming_uniform({in, out, kUpsampleKernel, kUpsampleKernel}, out * kUpsampleKernel * kUpsampleKernel, rng));
    u.gamma = store_.add_parameter(prefix + ".bn.gamma", Tensor(Shape{out}, 1.0));
    u.beta = store_.add_parameter(prefix + ".bn.beta", Tensor(Shape{out}, 0.0));
    u.bn = bn_states_.size();
    bn_states_.emplace_back(out);
    store_.add_buffer(prefix + ".bn.running_mean", bn_states_.back().running_mean);
    store_.add_buffer(prefix + ".bn.running_var", bn_states_.back().running_var);
    ups_.push_back(std::move(u));
    in = out;
  }
  out_weight_ = store_.add_parameter("decoder.out.weight",
                                     kaiming_uniform({config_.in_channels, in, 3, 3}, in * 9, rng));
  out_bias_ = store_.add_parameter("decoder.out.bias", Tensor(Shape{config_.in_channels}, 0.0));

  std::size_t cin = config_.in_channels;
  for (std::size_t i = 0; i < config_.classifier_widths.size(); ++i) {
    const std::size_t cout = config_.classifier_widths[i];
    const std::string prefix = "classifier.conv" + std::to_string(i);
    cls_weights_.push_back(store_.add_parameter(prefix + ".weight", kaiming_uniform({cout, cin, 3, 3}, cin * 9, rng)));
    cls_biases_.push_back(store_.add_parameter(prefix + ".bias", Tensor(Shape{cout}, 0.0)));
    cin = cout;
  }
  fc_weight_ = store_.add_parameter("classifier.fc.weight", kaiming_uniform({cin, config_.num_classes}, cin, rng));
  fc_bias_ = store_.add_parameter("classifier.fc.bias", Tensor(Shape{config_.num_classes}, 0.0));
}

Tensor Model::apply(const ConvBn& block, const Tensor& x, Mode mode) {
  Tensor y = conv2d(x, block.weight, Tensor{}, block.stride, block.padding);
  return batchnorm2d(y, block.gamma, block.beta, bn_states_[block.bn], mode);
}

void Model::check_image(const Tensor& image, const char* op) const {
  const Shape expected{image.rank() == 4 ? image.dim(0) : 0, config_.in_channels, config_.image_size,
                       config_.image_size};
  if (image.rank() != 4 || image.shape() != expected) {
    throw ValidationError(std::string(op) + ": expected images [N," + std::to_string(config_.in_channels) + "," +
                          std::to_string(config_.image_size) + "," + std::to_string(config_.image_size) +
                          "], got " + shape_string(image.shape()));
  }
}

Tensor Model::encode(const Tensor& image, Mode mode) {
  check_image(image, "encode");
  Tensor x = relu(apply(stem_, image, mode));
  for (const auto& stage : stages_) {
    Tensor branch = relu(apply(stage.conv1, x, mode));
    branch = apply(stage.conv2, branch, mode);
    x = relu(add(branch, apply(stage.shortcut, x, mode)));
  }
  return x;
}

Tensor Model::attention(const Tensor& features, const std::optional<AttentionSet>& forced) {
  return oga_forward(features, config_.oga(), oga_, forced);
}

Tensor Model::wavelet_features(const Tensor& image) const {
  check_image(image, "wavelet_features");
  const std::size_t n = image.dim(0), c = config_.in_channels, size = config_.image_size;
  const std::size_t levels = config_.wavelet_levels();
  const std::size_t s = config_.bottleneck_size();
  const std::size_t pool = size / s;
  const auto& bank = wavelet::FilterBank::by_name(config_.wavelet_bank);
  const wavelet::Band bands[] = {wavelet::Band::LL, wavelet::Band::LH, wavelet::Band::HL, wavelet::Band::HH};

  const std::size_t planes = 8 * c;
  std::vector<double> out(n * planes * s * s);
  auto src = image.data();
  for (std::size_t b = 0; b < n; ++b) {
    Tensor sample(Shape{c, size, size},
                  std::vector<double>(src.begin() + b * c * size * size, src.begin() + (b + 1) * c * size * size));
    const auto dwt = wavelet::dwt2d(sample, bank, levels);
    const auto swt = wavelet::swt2d(sample, bank, levels);
    double* dst = out.data() + b * planes * s * s;
    std::size_t slot = 0;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (auto band : bands) {
        const auto& p = dwt[ch].plane(levels, band);
        std::copy(p.values.begin(), p.values.end(), dst + slot++ * s * s);
      }
    for (std::size_t ch = 0; ch < c; ++ch)
      for (auto band : bands) {
        const auto& p = swt[ch].plane(levels, band);
        double* plane = dst + slot++ * s * s;
        std::fill(plane, plane + s * s, 0.0);
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x) plane[(y / pool) * s + x / pool] += p(y, x);
        for (std::size_t i = 0; i < s * s; ++i) plane[i] /= static_cast<double>(pool * pool);
      }
    // Per-plane standardization; approximation gains of 2^J would otherwise
    // dominate the detail planes.
    for (std::size_t k = 0; k < planes; ++k) {
      double* plane = dst + k * s * s;
      double m = 0.0;
      for (std::size_t i = 0; i < s * s; ++i) m += plane[i];
      m /= static_cast<double>(s * s);
      double var = 0.0;
      for (std::size_t i = 0; i < s * s; ++i) var += (plane[i] - m) * (plane[i] - m);
      var /= static_cast<double>(s * s);
      const double inv = 1.0 / std::sqrt(var + kPlaneEps);
      for (std::size_t i = 0; i < s * s; ++i) plane[i] = (plane[i] - m) * inv;
    }
  }
  return Tensor(Shape{n, planes, s, s}, std::move(out));
}

Tensor Model::fuse(const Tensor& oga_out, const Tensor& image) const {
  const FusionPlan plan = fusion_plan();
  const std::size_t s = config_.bottleneck_size();
  if (oga_out.rank() != 4 || oga_out.dim(1) != plan.encoder_channels || oga_out.dim(2) != s || oga_out.dim(3) != s ||
      image.rank() != 4 || image.dim(0) != oga_out.dim(0)) {
    throw DimensionError("fuse: features " + shape_string(oga_out.shape()) + " and image " +
                         shape_string(image.shape()) + " do not fit " + plan.describe() + " at " +
                         std::to_string(s) + "x" + std::to_string(s));
  }
  const Tensor parts[] = {oga_out, wavelet_features(image)};
  Tensor fused = concat_channels(parts);
  if (fused.dim(1) != plan.fused_channels()) {
    throw DimensionError("fuse: produced " + std::to_string(fused.dim(1)) + " channels, " + plan.describe());
  }
  return fused;
}

Tensor Model::decode(const Tensor& fused, Mode mode) {
  const std::size_t s = config_.bottleneck_size();
  const std::size_t cf = fusion_plan().fused_channels();
  if (fused.rank() != 4 || fused.dim(1) != cf || fused.dim(2) != s || fused.dim(3) != s) {
    throw DimensionError("decode: expected [N," + std::to_string(cf) + "," + std::to_string(s) + "," +
                         std::to_string(s) + "], got " + shape_string(fused.shape()));
  }
  Tensor x = fused;
  for (const auto& up : ups_) {
    x = transposed_conv2d(x, up.weight, 2, 1);
    x = relu(batchnorm2d(x, up.gamma, up.beta, bn_states_[up.bn], mode));
  }
  return sigmoid(conv2d(x, out_weight_, out_bias_, 1, 1));
}

Tensor Model::classify(const Tensor& recon) const {
  check_image(recon, "classify");
  Tensor x = recon;
  for (std::size_t i = 0; i < cls_weights_.size(); ++i) {
    x = relu(conv2d(x, cls_weights_[i], cls_biases_[i], 2, 1));
  }
  return linear(global_avg_pool(x), fc_weight_, fc_bias_);
}

Model::Output Model::forward(const Tensor& image, Mode mode) {
  Tensor features = encode(image, mode);
  Tensor weighted = attention(features);
  Tensor recon = decode(fuse(weighted, image), mode);
  Tensor logits = classify(recon);
  return Output{std::move(logits), std::move(recon)};
}

Model::Loss Model::forward_loss(const Tensor& image, std::span<const int> labels, Mode mode) {
  Output out = forward(image, mode);
  Tensor ce = cross_entropy(out.logits, labels);
  Tensor total = ce;
  if (config_.recon_loss_weight > 0.0) {
    total = add(ce, scale(mse_loss(out.recon, image), config_.recon_loss_weight));
  }
  return Loss{std::move(total), std::move(ce), std::move(out.logits), std::move(out.recon)};
}

}  // namespace ogaw
