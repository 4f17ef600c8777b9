#include "ogaw/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "ogaw/error.hpp"
#include "ogaw/gradcheck.hpp"

namespace ogaw {

using detail::finish;
using detail::grad_buffer;
using detail::should_record;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(x.shape()));
  }
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v;
  h *= 0x100000001b3ULL;
  return h;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  bool track = should_record({&a, &b});
  return finish("add", a.shape(), std::move(out), track, [a, b](std::span<const double> g) {
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto& gt = grad_buffer(*t);
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  bool track = should_record({&a, &b});
  return finish("sub", a.shape(), std::move(out), track, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto& ga = grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto& gb = grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  bool track = should_record({&a, &b});
  return finish("mul", a.shape(), std::move(out), track, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto& ga = grad_buffer(a);
      auto db = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * db[i];
    }
    if (b.requires_grad()) {
      auto& gb = grad_buffer(b);
      auto da = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * da[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  bool track = should_record({&a});
  return finish("scale", a.shape(), std::move(out), track, [a, factor](std::span<const double> g) {
    auto& ga = grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor relu(const Tensor& x) {
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dx[i] > 0.0 ? dx[i] : 0.0;
  if (detail::kink_monitor_active()) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      word = (word << 1) | (dx[i] > 0.0 ? 1u : 0u);
      if ((i & 63) == 63) {
        h = fnv_mix(h, word);
        word = 0;
      }
    }
    detail::note_kink_pattern(fnv_mix(h, word));
  }
  bool track = should_record({&x});
  return finish("relu", x.shape(), std::move(out), track, [x](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    auto dx = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (dx[i] > 0.0) gx[i] += g[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = dx[i];
    // Branches keep exp() from overflowing for large |v|.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  bool track = should_record({&x});
  auto y = std::make_shared<std::vector<double>>(track ? out : std::vector<double>{});
  return finish("sigmoid", x.shape(), std::move(out), track, [x, y](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    const auto& yv = *y;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  auto dx = x.data();
  std::vector<double> out(dx.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, dx[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        double e = std::exp(dx[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  bool track = should_record({&x});
  auto y = std::make_shared<std::vector<double>>(track ? out : std::vector<double>{});
  return finish("softmax", shape, std::move(out), track, [x, y, outer, inner, len](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    const auto& yv = *y;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += g[base + k * inner] * yv[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * inner;
          gx[idx] += yv[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  bool track = should_record({&x});
  return finish("sum", Shape{}, {total}, track, [x](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    for (double& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double total = 0.0;
  for (double v : x.data()) total += v;
  bool track = should_record({&x});
  return finish("mean", Shape{}, {total / n}, track, [x, n](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    for (double& v : gx) v += g[0] / n;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  bool track = should_record({&x});
  return finish("reshape", std::move(shape), std::move(out), track, [x](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  const std::size_t n = x.dim(0), f = x.dim(1), g = weight.dim(1);
  if (weight.dim(0) != f) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g)) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  std::vector<double> out(n * g);
  MutMap y(out.data(), n, g);
  y.noalias() = ConstMap(x.data().data(), n, f) * ConstMap(weight.data().data(), f, g);
  if (bias.defined()) {
    auto db = bias.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < g; ++j) out[i * g + j] += db[j];
  }
  bool track = should_record({&x, &weight, bias.defined() ? &bias : nullptr});
  return finish("linear", Shape{n, g}, std::move(out), track, [x, weight, bias, n, f, g](std::span<const double> go) {
    ConstMap gy(go.data(), n, g);
    if (x.requires_grad()) {
      MutMap gx(grad_buffer(x).data(), n, f);
      gx.noalias() += gy * ConstMap(weight.data().data(), f, g).transpose();
    }
    if (weight.requires_grad()) {
      MutMap gw(grad_buffer(weight).data(), f, g);
      gw.noalias() += ConstMap(x.data().data(), n, f).transpose() * gy;
    }
    if (bias.defined() && bias.requires_grad()) {
      auto& gb = grad_buffer(bias);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g; ++j) gb[j] += go[i * g + j];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank("global_avg_pool", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  auto dx = x.data();
  std::vector<double> out(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    double total = 0.0;
    for (std::size_t p = 0; p < plane; ++p) total += dx[i * plane + p];
    out[i] = total / static_cast<double>(plane);
  }
  bool track = should_record({&x});
  return finish("global_avg_pool", Shape{n, c}, std::move(out), track, [x, n, c, plane](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t i = 0; i < n * c; ++i)
      for (std::size_t p = 0; p < plane; ++p) gx[i * plane + p] += g[i] * inv;
  });
}

Tensor avg_pool2d(const Tensor& x, std::size_t factor) {
  require_rank("avg_pool2d", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (factor == 0 || h % factor != 0 || w % factor != 0) {
    throw DimensionError("avg_pool2d: extents " + shape_string(x.shape()) + " not divisible by factor " +
                         std::to_string(factor));
  }
  const std::size_t ho = h / factor, wo = w / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  auto dx = x.data();
  std::vector<double> out(n * c * ho * wo, 0.0);
  for (std::size_t nc = 0; nc < n * c; ++nc)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(nc * ho + y / factor) * wo + xx / factor] += dx[(nc * h + y) * w + xx] * inv;
  bool track = should_record({&x});
  return finish("avg_pool2d", Shape{n, c, ho, wo}, std::move(out), track,
                [x, n, c, h, w, ho, wo, factor, inv](std::span<const double> g) {
                  auto& gx = grad_buffer(x);
                  for (std::size_t nc = 0; nc < n * c; ++nc)
                    for (std::size_t y = 0; y < h; ++y)
                      for (std::size_t xx = 0; xx < w; ++xx)
                        gx[(nc * h + y) * w + xx] += g[(nc * ho + y / factor) * wo + xx / factor] * inv;
                });
}

Tensor maxpool2d(const Tensor& x) {
  require_rank("maxpool2d", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw DimensionError("maxpool2d: input " + shape_string(x.shape()) + " smaller than 2x2");
  const std::size_t ho = h / 2, wo = w / 2;
  auto dx = x.data();
  std::vector<double> out(n * c * ho * wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t xx = 0; xx < wo; ++xx) {
        std::size_t best = (nc * h + 2 * y) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dxx = 0; dxx < 2; ++dxx) {
            std::size_t idx = (nc * h + 2 * y + dy) * w + 2 * xx + dxx;
            if (dx[idx] > dx[best]) best = idx;
          }
        const std::size_t o = (nc * ho + y) * wo + xx;
        out[o] = dx[best];
        (*argmax)[o] = best;
      }
    }
  }
  if (detail::kink_monitor_active()) {
    std::uint64_t h64 = 0xcbf29ce484222325ULL;
    for (auto idx : *argmax) h64 = fnv_mix(h64, idx);
    detail::note_kink_pattern(h64);
  }
  bool track = should_record({&x});
  return finish("maxpool2d", Shape{n, c, ho, wo}, std::move(out), track, [x, argmax](std::span<const double> g) {
    auto& gx = grad_buffer(x);
    for (std::size_t o = 0; o < g.size(); ++o) gx[(*argmax)[o]] += g[o];
  });
}

Tensor concat_channels(std::span<const Tensor> inputs) {
  if (inputs.empty()) throw DimensionError("concat_channels: no inputs");
  for (std::size_t i = 0; i < inputs.size(); ++i) require_rank("concat_channels", inputs[i], 4);
  const auto& s0 = inputs[0].shape();
  std::size_t total_c = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& s = inputs[i].shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw DimensionError("concat_channels: input " + std::to_string(i) + " has shape " + shape_string(s) +
                           ", expected N,H,W of " + shape_string(s0));
    }
    total_c += s[1];
  }
  const std::size_t n = s0[0], plane = s0[2] * s0[3];
  std::vector<double> out(n * total_c * plane);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : inputs) {
    offsets.push_back(off);
    const std::size_t c = t.dim(1);
    auto d = t.data();
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(d.begin() + b * c * plane, c * plane, out.begin() + (b * total_c + off) * plane);
    off += c;
  }
  std::vector<Tensor> held(inputs.begin(), inputs.end());
  bool track = should_record(inputs);
  return finish("concat_channels", Shape{n, total_c, s0[2], s0[3]}, std::move(out), track,
                [held, offsets, n, total_c, plane](std::span<const double> g) {
                  for (std::size_t i = 0; i < held.size(); ++i) {
                    if (!held[i].requires_grad()) continue;
                    auto& gt = grad_buffer(held[i]);
                    const std::size_t c = held[i].dim(1);
                    for (std::size_t b = 0; b < n; ++b)
                      for (std::size_t k = 0; k < c * plane; ++k)
                        gt[b * c * plane + k] += g[(b * total_c + offsets[i]) * plane + k];
                  }
                });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank("slice_channels", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (begin >= end || end > c) {
    throw DimensionError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + shape_string(x.shape()));
  }
  const std::size_t width = end - begin;
  auto d = x.data();
  std::vector<double> out(n * width * plane);
  for (std::size_t b = 0; b < n; ++b)
    std::copy_n(d.begin() + (b * c + begin) * plane, width * plane, out.begin() + b * width * plane);
  bool track = should_record({&x});
  return finish("slice_channels", Shape{n, width, x.dim(2), x.dim(3)}, std::move(out), track,
                [x, n, c, plane, begin, width](std::span<const double> g) {
                  auto& gx = grad_buffer(x);
                  for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t k = 0; k < width * plane; ++k)
                      gx[(b * c + begin) * plane + k] += g[b * width * plane + k];
                });
}

BatchNormState::BatchNormState(std::size_t channels)
    : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, Mode mode) {
  require_rank("batchnorm2d", x, 4);
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &state.running_mean, &state.running_var}) {
    if (t->shape() != Shape{c}) {
      throw DimensionError("batchnorm2d: per-channel tensor " + shape_string(t->shape()) + " does not match input " +
                           shape_string(x.shape()));
    }
  }
  const double count = static_cast<double>(n * plane);
  auto dx = x.data();
  auto dg = gamma.data();
  auto dbeta = beta.data();
  std::vector<double> mu(c), invstd(c);
  if (mode == Mode::Train) {
    if (n * plane < 2) throw DimensionError("batchnorm2d: training needs more than one value per channel");
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double total = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < plane; ++p) total += dx[(b * c + ch) * plane + p];
      const double m = total / count;
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = dx[(b * c + ch) * plane + p] - m;
          sq += d * d;
        }
      const double var = sq / count;
      mu[ch] = m;
      invstd[ch] = 1.0 / std::sqrt(var + state.eps);
      rm[ch] = (1.0 - state.momentum) * rm[ch] + state.momentum * m;
      rv[ch] = (1.0 - state.momentum) * rv[ch] + state.momentum * var * count / (count - 1.0);
    }
  } else {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = rm[ch];
      invstd[ch] = 1.0 / std::sqrt(rv[ch] + state.eps);
    }
  }
  std::vector<double> out(dx.size());
  auto xhat = std::make_shared<std::vector<double>>(dx.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < plane; ++p) {
        const std::size_t i = (b * c + ch) * plane + p;
        (*xhat)[i] = (dx[i] - mu[ch]) * invstd[ch];
        out[i] = dg[ch] * (*xhat)[i] + dbeta[ch];
      }
  bool track = should_record({&x, &gamma, &beta});
  const bool train = mode == Mode::Train;
  return finish("batchnorm2d", x.shape(), std::move(out), track,
                [x, gamma, beta, xhat, invstd, n, c, plane, count, train](std::span<const double> g) {
                  auto dg = gamma.data();
                  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                  for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t ch = 0; ch < c; ++ch)
                      for (std::size_t p = 0; p < plane; ++p) {
                        const std::size_t i = (b * c + ch) * plane + p;
                        sum_g[ch] += g[i];
                        sum_gx[ch] += g[i] * (*xhat)[i];
                      }
                  if (gamma.requires_grad()) {
                    auto& gg = grad_buffer(gamma);
                    for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
                  }
                  if (beta.requires_grad()) {
                    auto& gb = grad_buffer(beta);
                    for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
                  }
                  if (!x.requires_grad()) return;
                  auto& gx = grad_buffer(x);
                  for (std::size_t b = 0; b < n; ++b)
                    for (std::size_t ch = 0; ch < c; ++ch)
                      for (std::size_t p = 0; p < plane; ++p) {
                        const std::size_t i = (b * c + ch) * plane + p;
                        if (train) {
                          gx[i] += dg[ch] * invstd[ch] *
                                   (g[i] - sum_g[ch] / count - (*xhat)[i] * sum_gx[ch] / count);
                        } else {
                          gx[i] += dg[ch] * invstd[ch] * g[i];
                        }
                      }
                });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " rows of logits");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ValidationError("cross_entropy: label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                            " outside [0," + std::to_string(c) + ")");
    }
  }
  auto dz = logits.data();
  auto probs = std::make_shared<std::vector<double>>(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = dz.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    total += lse - row[labels[i]];
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(row[j] - lse);
  }
  std::vector<int> held(labels.begin(), labels.end());
  bool track = should_record({&logits});
  return finish("cross_entropy", Shape{}, {total / static_cast<double>(n)}, track,
                [logits, probs, held, n, c](std::span<const double> g) {
                  auto& gz = grad_buffer(logits);
                  const double s = g[0] / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                      const double onehot = static_cast<int>(j) == held[i] ? 1.0 : 0.0;
                      gz[i * c + j] += s * ((*probs)[i * c + j] - onehot);
                    }
                });
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape("mse_loss", prediction, target);
  auto dp = prediction.data();
  auto dt = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < dp.size(); ++i) {
    const double d = dp[i] - dt[i];
    total += d * d;
  }
  const double n = static_cast<double>(dp.size());
  bool track = should_record({&prediction});
  return finish("mse_loss", Shape{}, {total / n}, track, [prediction, target, n](std::span<const double> g) {
    auto& gp = grad_buffer(prediction);
    auto dp = prediction.data();
    auto dt = target.data();
    for (std::size_t i = 0; i < dp.size(); ++i) gp[i] += g[0] * 2.0 * (dp[i] - dt[i]) / n;
  });
}

}  // namespace ogaw
