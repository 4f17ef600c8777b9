#include "ogaw/oga.hpp"

#include <algorithm>

#include "ogaw/error.hpp"
#include "ogaw/ops.hpp"

namespace ogaw {

using detail::finish;
using detail::grad_buffer;
using detail::should_record;

std::size_t OgaConfig::hidden() const {
  return std::max<std::size_t>(4, reduction_ratio ? c_in / reduction_ratio : 0);
}

void OgaConfig::validate() const {
  if (c_in == 0 || c_out == 0 || kernel_size == 0 || num_kernels == 0 || reduction_ratio == 0) {
    throw ValidationError("oga: c_in, c_out, kernel_size, num_kernels and reduction_ratio must be positive");
  }
  if (kernel_size % 2 == 0) {
    throw ValidationError("oga: kernel_size " + std::to_string(kernel_size) + " must be odd for same-size output");
  }
}

AttentionSet AttentionSet::identity(const OgaConfig& config, std::size_t batch, std::size_t index) {
  if (index >= config.num_kernels) throw ValidationError("oga: kernel index out of range");
  const std::size_t k = config.kernel_size;
  Tensor kernel(Shape{batch, config.num_kernels}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) kernel.mutable_data()[b * config.num_kernels + index] = 1.0;
  return AttentionSet{Tensor(Shape{batch, k, k}, 1.0), Tensor(Shape{batch, config.c_in}, 1.0),
                      Tensor(Shape{batch, config.c_out}, 1.0), std::move(kernel)};
}

OgaParams OgaParams::init(const OgaConfig& config, Rng& rng) {
  config.validate();
  const std::size_t h = config.hidden(), k = config.kernel_size, n = config.num_kernels;
  OgaParams p;
  p.fc_weight = kaiming_uniform({config.c_in, h}, config.c_in, rng);
  p.fc_bias = Tensor(Shape{h}, 0.0);
  p.spatial_weight = kaiming_uniform({h, k * k}, h, rng);
  p.spatial_bias = Tensor(Shape{k * k}, 0.0);
  p.channel_weight = kaiming_uniform({h, config.c_in}, h, rng);
  p.channel_bias = Tensor(Shape{config.c_in}, 0.0);
  p.filter_weight = kaiming_uniform({h, config.c_out}, h, rng);
  p.filter_bias = Tensor(Shape{config.c_out}, 0.0);
  p.kernel_weight = kaiming_uniform({h, n}, h, rng);
  p.kernel_bias = Tensor(Shape{n}, 0.0);
  p.bank = kaiming_uniform({n, config.c_out, config.c_in, k, k}, config.c_in * k * k, rng);
  p.bias = Tensor(Shape{config.c_out}, 0.0);
  return p;
}

OgaParams OgaParams::registered(ParameterStore& store, const std::string& prefix) const {
  OgaParams p;
  p.fc_weight = store.add_parameter(prefix + ".fc.weight", fc_weight);
  p.fc_bias = store.add_parameter(prefix + ".fc.bias", fc_bias);
  p.spatial_weight = store.add_parameter(prefix + ".spatial.weight", spatial_weight);
  p.spatial_bias = store.add_parameter(prefix + ".spatial.bias", spatial_bias);
  p.channel_weight = store.add_parameter(prefix + ".channel.weight", channel_weight);
  p.channel_bias = store.add_parameter(prefix + ".channel.bias", channel_bias);
  p.filter_weight = store.add_parameter(prefix + ".filter.weight", filter_weight);
  p.filter_bias = store.add_parameter(prefix + ".filter.bias", filter_bias);
  p.kernel_weight = store.add_parameter(prefix + ".kernel.weight", kernel_weight);
  p.kernel_bias = store.add_parameter(prefix + ".kernel.bias", kernel_bias);
  p.bank = store.add_parameter(prefix + ".bank", bank);
  p.bias = store.add_parameter(prefix + ".bias", bias);
  return p;
}

AttentionSet attend(const Tensor& features, const OgaConfig& config, const OgaParams& params) {
  if (features.rank() != 4 || features.dim(1) != config.c_in) {
    throw DimensionError("oga attend: features " + shape_string(features.shape()) + " do not have c_in=" +
                         std::to_string(config.c_in) + " channels");
  }
  const std::size_t n = features.dim(0), k = config.kernel_size;
  Tensor hidden = relu(linear(global_avg_pool(features), params.fc_weight, params.fc_bias));
  AttentionSet att;
  att.spatial = reshape(sigmoid(linear(hidden, params.spatial_weight, params.spatial_bias)), Shape{n, k, k});
  att.channel = sigmoid(linear(hidden, params.channel_weight, params.channel_bias));
  att.filter = sigmoid(linear(hidden, params.filter_weight, params.filter_bias));
  att.kernel = softmax(linear(hidden, params.kernel_weight, params.kernel_bias), 1);
  return att;
}

Tensor aggregate_kernel(const AttentionSet& att, const Tensor& bank) {
  if (bank.rank() != 5 || bank.dim(3) != bank.dim(4)) {
    throw DimensionError("aggregate_kernel: bank must be [n,c_out,c_in,k,k], got " + shape_string(bank.shape()));
  }
  const std::size_t nk = bank.dim(0), co = bank.dim(1), ci = bank.dim(2), kk = bank.dim(3) * bank.dim(4);
  const std::size_t batch = att.kernel.dim(0);
  if (att.kernel.shape() != Shape{batch, nk} || att.spatial.shape() != Shape{batch, bank.dim(3), bank.dim(4)} ||
      att.channel.shape() != Shape{batch, ci} || att.filter.shape() != Shape{batch, co}) {
    throw DimensionError("aggregate_kernel: attentions (spatial " + shape_string(att.spatial.shape()) + ", channel " +
                         shape_string(att.channel.shape()) + ", filter " + shape_string(att.filter.shape()) +
                         ", kernel " + shape_string(att.kernel.shape()) + ") do not match bank " +
                         shape_string(bank.shape()));
  }
  const std::size_t per_kernel = co * ci * kk;
  auto s = att.spatial.data();
  auto c = att.channel.data();
  auto f = att.filter.data();
  auto a = att.kernel.data();
  auto w = bank.data();

  // mixed[b] = sum_i a[b,i] bank[i]; the gates then multiply elementwise.
  auto mixed = std::make_shared<std::vector<double>>(batch * per_kernel, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < nk; ++i) {
      const double ai = a[b * nk + i];
      double* dst = mixed->data() + b * per_kernel;
      const double* src = w.data() + i * per_kernel;
      for (std::size_t e = 0; e < per_kernel; ++e) dst[e] += ai * src[e];
    }
  std::vector<double> out(batch * per_kernel);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t ic = 0; ic < ci; ++ic)
        for (std::size_t p = 0; p < kk; ++p) {
          const std::size_t e = (o * ci + ic) * kk + p;
          out[b * per_kernel + e] = s[b * kk + p] * c[b * ci + ic] * f[b * co + o] * (*mixed)[b * per_kernel + e];
        }

  const bool track = should_record({&att.spatial, &att.channel, &att.filter, &att.kernel, &bank});
  return finish(
      "aggregate_kernel", Shape{batch, co, ci, bank.dim(3), bank.dim(4)}, std::move(out), track,
      [att, bank, mixed, batch, nk, co, ci, kk, per_kernel](std::span<const double> g) {
        auto s = att.spatial.data();
        auto c = att.channel.data();
        auto f = att.filter.data();
        auto a = att.kernel.data();
        auto w = bank.data();
        double* gs = att.spatial.requires_grad() ? grad_buffer(att.spatial).data() : nullptr;
        double* gc = att.channel.requires_grad() ? grad_buffer(att.channel).data() : nullptr;
        double* gf = att.filter.requires_grad() ? grad_buffer(att.filter).data() : nullptr;
        double* ga = att.kernel.requires_grad() ? grad_buffer(att.kernel).data() : nullptr;
        double* gw = bank.requires_grad() ? grad_buffer(bank).data() : nullptr;
        std::vector<double> gmixed(per_kernel);
        for (std::size_t b = 0; b < batch; ++b) {
          const double* mb = mixed->data() + b * per_kernel;
          const double* gb = g.data() + b * per_kernel;
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t ic = 0; ic < ci; ++ic)
              for (std::size_t p = 0; p < kk; ++p) {
                const std::size_t e = (o * ci + ic) * kk + p;
                const double sv = s[b * kk + p], cv = c[b * ci + ic], fv = f[b * co + o];
                const double ge = gb[e];
                gmixed[e] = ge * sv * cv * fv;
                if (gs) gs[b * kk + p] += ge * cv * fv * mb[e];
                if (gc) gc[b * ci + ic] += ge * sv * fv * mb[e];
                if (gf) gf[b * co + o] += ge * sv * cv * mb[e];
              }
          for (std::size_t i = 0; i < nk; ++i) {
            const double* wi = w.data() + i * per_kernel;
            if (ga) {
              double dot = 0.0;
              for (std::size_t e = 0; e < per_kernel; ++e) dot += gmixed[e] * wi[e];
              ga[b * nk + i] += dot;
            }
            if (gw) {
              const double ai = a[b * nk + i];
              double* gwi = gw + i * per_kernel;
              for (std::size_t e = 0; e < per_kernel; ++e) gwi[e] += ai * gmixed[e];
            }
          }
        }
      });
}

Tensor oga_forward(const Tensor& features, const OgaConfig& config, const OgaParams& params,
                   const std::optional<AttentionSet>& forced) {
  config.validate();
  if (features.rank() != 4 || features.dim(1) != config.c_in) {
    throw DimensionError("oga: features " + shape_string(features.shape()) + " do not have c_in=" +
                         std::to_string(config.c_in) + " channels");
  }
  AttentionSet att = forced ? *forced : attend(features, config, params);
  if (att.batch() != features.dim(0)) {
    throw DimensionError("oga: attentions cover " + std::to_string(att.batch()) + " samples, batch has " +
                         std::to_string(features.dim(0)));
  }
  Tensor kernels = aggregate_kernel(att, params.bank);
  return conv2d_per_sample(features, kernels, params.bias, 1, (config.kernel_size - 1) / 2);
}

}  // namespace ogaw
