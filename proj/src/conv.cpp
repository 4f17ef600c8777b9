#include <string>

#include <Eigen/Core>

#include "ogaw/error.hpp"
#include "ogaw/ops.hpp"

namespace ogaw {

using detail::finish;
using detail::grad_buffer;
using detail::should_record;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

struct ConvGeometry {
  std::size_t channels, height, width;  // image side of the patch matrix
  std::size_t kernel, stride, padding;
  std::size_t out_h, out_w;             // patch grid

  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return out_h * out_w; }
};

// Patch matrix [C·k·k, Ho·Wo] of one image [C,H,W].
void im2col(const double* image, const ConvGeometry& g, double* col) {
  const std::size_t cols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double* row = col + ((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                                ix < static_cast<long>(g.width);
            row[oy * g.out_w + ox] = inside ? image[(c * g.height + iy) * g.width + ix] : 0.0;
          }
        }
      }
}

// Scatter-adds a patch matrix back onto an image; adjoint of im2col.
void col2im(const double* col, const ConvGeometry& g, double* image) {
  const std::size_t cols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel; ++ky)
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* row = col + ((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            image[(c * g.height + iy) * g.width + ix] += row[oy * g.out_w + ox];
          }
        }
      }
}

// Shared path of conv2d (weight_stride 0) and conv2d_per_sample.
Tensor conv_impl(const char* op, const Tensor& input, const Tensor& weights, bool per_sample, const Tensor& bias,
                 std::size_t stride, std::size_t padding) {
  if (input.rank() != 4) throw DimensionError(std::string(op) + ": input must be [N,C,H,W], got " + shape_string(input.shape()));
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto& ws = weights.shape();
  const std::size_t lead = per_sample ? 1 : 0;
  if (ws.size() != 4 + lead) {
    throw DimensionError(std::string(op) + ": weight shape " + shape_string(ws) + " has wrong rank");
  }
  if (per_sample && ws[0] != n) {
    throw DimensionError(std::string(op) + ": weights " + shape_string(ws) + " carry " + std::to_string(ws[0]) +
                         " kernels for batch of " + std::to_string(n));
  }
  const std::size_t cout = ws[lead], k = ws[lead + 2];
  if (ws[lead + 1] != cin || ws[lead + 3] != k) {
    throw DimensionError(std::string(op) + ": input " + shape_string(input.shape()) + " and weight " +
                         shape_string(ws) + " disagree on input channels");
  }
  if (stride == 0) throw ValidationError(std::string(op) + ": stride must be at least 1");
  if (k > h + 2 * padding || k > w + 2 * padding) {
    throw DimensionError(std::string(op) + ": kernel " + std::to_string(k) + " exceeds padded input " +
                         shape_string(input.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw DimensionError(std::string(op) + ": bias " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
  }
  ConvGeometry geo{cin, h, w, k, stride, padding, conv_output_extent(h, k, stride, padding),
                   conv_output_extent(w, k, stride, padding)};
  const std::size_t rows = geo.rows(), cols = geo.cols();
  const std::size_t kernel_size = cout * rows;

  std::vector<double> out(n * cout * cols);
  std::vector<double> col(rows * cols);
  auto dx = input.data();
  auto dw = weights.data();
  for (std::size_t b = 0; b < n; ++b) {
    im2col(dx.data() + b * cin * h * w, geo, col.data());
    ConstMap wmat(dw.data() + (per_sample ? b * kernel_size : 0), cout, rows);
    MutMap y(out.data() + b * cout * cols, cout, cols);
    y.noalias() = wmat * ConstMap(col.data(), rows, cols);
  }
  if (bias.defined()) {
    auto db = bias.data();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t p = 0; p < cols; ++p) out[(b * cout + o) * cols + p] += db[o];
  }

  bool track = should_record({&input, &weights, bias.defined() ? &bias : nullptr});
  return finish(op, Shape{n, cout, geo.out_h, geo.out_w}, std::move(out), track,
                [input, weights, bias, geo, per_sample, n, cout, kernel_size](std::span<const double> g) {
                  const std::size_t rows = geo.rows(), cols = geo.cols();
                  const std::size_t image_size = geo.channels * geo.height * geo.width;
                  std::vector<double> col(rows * cols);
                  auto dx = input.data();
                  auto dw = weights.data();
                  double* gx = input.requires_grad() ? grad_buffer(input).data() : nullptr;
                  double* gw = weights.requires_grad() ? grad_buffer(weights).data() : nullptr;
                  for (std::size_t b = 0; b < n; ++b) {
                    ConstMap gy(g.data() + b * cout * cols, cout, cols);
                    const std::size_t woff = per_sample ? b * kernel_size : 0;
                    if (gw) {
                      im2col(dx.data() + b * image_size, geo, col.data());
                      MutMap(gw + woff, cout, rows).noalias() += gy * ConstMap(col.data(), rows, cols).transpose();
                    }
                    if (gx) {
                      MutMap(col.data(), rows, cols).noalias() = ConstMap(dw.data() + woff, cout, rows).transpose() * gy;
                      col2im(col.data(), geo, gx + b * image_size);
                    }
                  }
                  if (bias.defined() && bias.requires_grad()) {
                    auto& gb = grad_buffer(bias);
                    for (std::size_t b = 0; b < n; ++b)
                      for (std::size_t o = 0; o < cout; ++o)
                        for (std::size_t p = 0; p < cols; ++p) gb[o] += g[(b * cout + o) * cols + p];
                  }
                });
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t padding) {
  return conv_impl("conv2d", input, weight, false, bias, stride, padding);
}

Tensor conv2d_per_sample(const Tensor& input, const Tensor& weights, const Tensor& bias, std::size_t stride,
                         std::size_t padding) {
  return conv_impl("conv2d_per_sample", input, weights, true, bias, stride, padding);
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t padding) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw DimensionError("transposed_conv2d: expected input [N,C,H,W] and weight [Cin,Cout,k,k], got " +
                         shape_string(input.shape()) + " and " + shape_string(weight.shape()));
  }
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin || weight.dim(3) != k) {
    throw DimensionError("transposed_conv2d: input " + shape_string(input.shape()) + " and weight " +
                         shape_string(weight.shape()) + " disagree on input channels");
  }
  if (stride == 0) throw ValidationError("transposed_conv2d: stride must be at least 1");
  const long ho = static_cast<long>((h - 1) * stride + k) - 2 * static_cast<long>(padding);
  const long wo = static_cast<long>((w - 1) * stride + k) - 2 * static_cast<long>(padding);
  if (ho <= 0 || wo <= 0) {
    throw DimensionError("transposed_conv2d: computed output extent " + std::to_string(ho) + "x" +
                         std::to_string(wo) + " is not positive");
  }
  // The output plays the image role of the equivalent forward convolution,
  // whose patch grid is the input grid.
  ConvGeometry geo{cout, static_cast<std::size_t>(ho), static_cast<std::size_t>(wo), k, stride, padding, h, w};
  const std::size_t rows = geo.rows(), cols = geo.cols();
  const std::size_t out_image = cout * geo.height * geo.width;

  std::vector<double> out(n * out_image, 0.0);
  std::vector<double> col(rows * cols);
  auto dx = input.data();
  ConstMap wmat(weight.data().data(), cin, rows);
  for (std::size_t b = 0; b < n; ++b) {
    MutMap(col.data(), rows, cols).noalias() = wmat.transpose() * ConstMap(dx.data() + b * cin * cols, cin, cols);
    col2im(col.data(), geo, out.data() + b * out_image);
  }
  bool track = should_record({&input, &weight});
  return finish("transposed_conv2d", Shape{n, cout, geo.height, geo.width}, std::move(out), track,
                [input, weight, geo, n, cin, out_image](std::span<const double> g) {
                  const std::size_t rows = geo.rows(), cols = geo.cols();
                  std::vector<double> col(rows * cols);
                  auto dx = input.data();
                  double* gx = input.requires_grad() ? grad_buffer(input).data() : nullptr;
                  double* gw = weight.requires_grad() ? grad_buffer(weight).data() : nullptr;
                  ConstMap wmat(weight.data().data(), cin, rows);
                  for (std::size_t b = 0; b < n; ++b) {
                    im2col(g.data() + b * out_image, geo, col.data());
                    ConstMap gcol(col.data(), rows, cols);
                    if (gx) MutMap(gx + b * cin * cols, cin, cols).noalias() += wmat * gcol;
                    if (gw) {
                      MutMap(gw, cin, rows).noalias() += ConstMap(dx.data() + b * cin * cols, cin, cols) * gcol.transpose();
                    }
                  }
                });
}

}  // namespace ogaw
