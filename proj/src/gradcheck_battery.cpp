#include "ogaw/gradcheck_battery.hpp"

#include "ogaw/model.hpp"
#include "ogaw/oga.hpp"
#include "ogaw/ops.hpp"
#include "ogaw/rng.hpp"

namespace ogaw {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Deep composites have gradients down to ~1e-8, where the roundoff of a 1e-5
// step is already at the tolerance; 3e-5 balances roundoff against truncation.
constexpr double kCompositeStep = 3e-5;

}  // namespace

std::vector<GradCheckCase> run_gradcheck_battery(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckCase> out;
  auto check = [&](std::string name, const GradCheckFn& fn, std::vector<Tensor> inputs, double eps = 1e-5) {
    out.push_back({std::move(name), gradient_check(fn, std::move(inputs), eps)});
  };
  auto r = [&](Shape s) { return random_tensor(std::move(s), rng); };

  check("add", [](auto in) { return add(in[0], in[1]); }, {r({2, 3}), r({2, 3})});
  check("sub", [](auto in) { return sub(in[0], in[1]); }, {r({2, 3}), r({2, 3})});
  check("mul", [](auto in) { return mul(in[0], in[1]); }, {r({2, 3}), r({2, 3})});
  check("scale", [](auto in) { return scale(in[0], -1.7); }, {r({4})});
  check("relu", [](auto in) { return relu(in[0]); }, {r({3, 5})});
  check("sigmoid", [](auto in) { return sigmoid(in[0]); }, {random_tensor({3, 4}, rng, -4, 4)});
  check("softmax", [](auto in) { return softmax(in[0], 1); }, {random_tensor({3, 5}, rng, -3, 3)});
  check("softmax_axis0", [](auto in) { return softmax(in[0], 0); }, {r({4, 2})});
  check("sum", [](auto in) { return sum(in[0]); }, {r({2, 3, 2})});
  check("mean", [](auto in) { return mean(in[0]); }, {r({2, 3, 2})});
  check("reshape", [](auto in) { return reshape(in[0], {3, 4}); }, {r({2, 6})});
  check("linear", [](auto in) { return linear(in[0], in[1], in[2]); }, {r({3, 4}), r({4, 5}), r({5})});
  check("global_avg_pool", [](auto in) { return global_avg_pool(in[0]); }, {r({2, 3, 4, 4})});
  check("avg_pool2d", [](auto in) { return avg_pool2d(in[0], 2); }, {r({2, 2, 4, 6})});
  check("maxpool2d", [](auto in) { return maxpool2d(in[0]); }, {r({2, 2, 4, 4})});
  check("concat_channels",
        [](auto in) {
          const Tensor parts[] = {in[0], in[1]};
          return concat_channels(parts);
        },
        {r({2, 1, 3, 3}), r({2, 3, 3, 3})});
  check("slice_channels", [](auto in) { return slice_channels(in[0], 1, 3); }, {r({2, 4, 2, 2})});
  check("batchnorm2d_train",
        [](auto in) {
          BatchNormState state(3);
          return batchnorm2d(in[0], in[1], in[2], state, Mode::Train);
        },
        {r({4, 3, 3, 3}), random_tensor({3}, rng, 0.5, 1.5), r({3})});
  {
    BatchNormState state(3);
    state.running_mean = r({3});
    state.running_var = random_tensor({3}, rng, 0.5, 2.0);
    check("batchnorm2d_eval",
          [state](auto in) mutable { return batchnorm2d(in[0], in[1], in[2], state, Mode::Eval); },
          {r({2, 3, 2, 2}), random_tensor({3}, rng, 0.5, 1.5), r({3})});
  }
  {
    const std::vector<int> labels{0, 2, 1, 2};
    check("cross_entropy", [labels](auto in) { return cross_entropy(in[0], labels); },
          {random_tensor({4, 3}, rng, -2, 2)});
  }
  {
    const Tensor target = r({2, 3, 2});
    check("mse_loss", [target](auto in) { return mse_loss(in[0], target); }, {r({2, 3, 2})});
  }
  check("conv2d", [](auto in) { return conv2d(in[0], in[1], in[2], 1, 1); },
        {r({2, 2, 5, 5}), r({3, 2, 3, 3}), r({3})});
  check("conv2d_stride2", [](auto in) { return conv2d(in[0], in[1], Tensor(), 2, 1); },
        {r({2, 2, 6, 6}), r({3, 2, 3, 3})});
  check("conv2d_per_sample", [](auto in) { return conv2d_per_sample(in[0], in[1], in[2], 1, 1); },
        {r({2, 2, 4, 4}), r({2, 3, 2, 3, 3}), r({3})});
  check("transposed_conv2d", [](auto in) { return transposed_conv2d(in[0], in[1], 2, 1); },
        {r({2, 3, 3, 3}), r({3, 2, 4, 4})});

  {
    OgaConfig cfg{.c_in = 4, .c_out = 3, .kernel_size = 3, .num_kernels = 3, .reduction_ratio = 2};
    const OgaParams base = OgaParams::init(cfg, rng);
    auto unpack = [](std::span<const Tensor> in) {
      OgaParams p;
      p.fc_weight = in[1];
      p.fc_bias = in[2];
      p.spatial_weight = in[3];
      p.spatial_bias = in[4];
      p.channel_weight = in[5];
      p.channel_bias = in[6];
      p.filter_weight = in[7];
      p.filter_bias = in[8];
      p.kernel_weight = in[9];
      p.kernel_bias = in[10];
      p.bank = in[11];
      p.bias = in[12];
      return p;
    };
    auto inputs = [&] {
      return std::vector<Tensor>{r({2, 4, 4, 4}),   base.fc_weight.detach(),      base.fc_bias.detach(),
                                 base.spatial_weight.detach(), r({9}),                       base.channel_weight.detach(),
                                 r({4}),                       base.filter_weight.detach(),  r({3}),
                                 base.kernel_weight.detach(),  r({3}),                       base.bank.detach(),
                                 r({3})};
    };
    check("oga_attend",
          [cfg, unpack](auto in) {
            const AttentionSet a = attend(in[0], cfg, unpack(in));
            const Tensor parts[] = {reshape(a.spatial, {a.batch(), 9}), a.channel, a.filter, a.kernel};
            Tensor total = sum(parts[0]);
            for (int i = 1; i < 4; ++i) total = add(total, sum(mul(parts[i], parts[i])));
            return total;
          },
          inputs(), kCompositeStep);
    check("oga_aggregate_kernel",
          [cfg](auto in) {
            AttentionSet a{in[0], in[1], in[2], softmax(in[3], 1)};
            return aggregate_kernel(a, in[4]);
          },
          {random_tensor({2, 3, 3}, rng, 0.1, 0.9), random_tensor({2, 4}, rng, 0.1, 0.9),
           random_tensor({2, 3}, rng, 0.1, 0.9), r({2, 3}), base.bank.detach()});
    check("oga_forward", [cfg, unpack](auto in) { return oga_forward(in[0], cfg, unpack(in)); }, inputs(),
          kCompositeStep);
  }

  {
    // Checks both model outputs (logits and reconstruction). A scalar loss of
    // order 1 carries about one ulp of rounding per evaluation, which swamps the
    // end-to-end gradients below 1e-7; the loss head is checked above.
    ModelConfig mc;
    mc.image_size = 16;
    mc.num_classes = 3;
    mc.encoder_widths = {4};
    mc.classifier_widths = {4, 4};
    mc.oga_num_kernels = 2;
    mc.oga_reduction_ratio = 2;
    auto model = std::make_shared<Model>(mc, seed);
    const Tensor image = random_tensor({4, 3, 16, 16}, rng, 0.0, 1.0);
    std::vector<Tensor> params;
    for (auto& p : model->store().parameters()) params.push_back(p.tensor);
    check("model_end_to_end",
          [model, image](auto) {
            const auto o = model->forward(image, Mode::Train);
            const Tensor parts[] = {reshape(o.logits, {1, o.logits.numel(), 1, 1}),
                                    reshape(o.recon, {1, o.recon.numel(), 1, 1})};
            return concat_channels(parts);
          },
          std::move(params), kCompositeStep);
  }
  return out;
}

}  // namespace ogaw
