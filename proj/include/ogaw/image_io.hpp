#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ogaw/tensor.hpp"

namespace ogaw::image {

/// 8-bit interleaved pixels; channels is 1 (gray), 2 (gray+alpha), 3 (RGB) or 4 (RGBA).
struct Image {
  std::size_t width = 0, height = 0, channels = 3;
  std::vector<std::uint8_t> pixels;
};

/// Binary PPM (P6) and PGM (P5) with maxval <= 255.
Image decode_pnm(std::span<const std::uint8_t> bytes);
/// Non-interlaced 8-bit PNG of color type gray, gray+alpha, RGB or RGBA.
Image decode_png(std::span<const std::uint8_t> bytes);
/// Dispatches on the file signature.
Image decode(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_ppm(const Image& image);
std::vector<std::uint8_t> encode_png(const Image& image);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

/// [3,H,W] with values / 255; gray is replicated and alpha dropped.
Tensor to_tensor(const Image& image);

/// Bilinear resampling of [C,H,W] with half-pixel centers
/// (src = (dst + 0.5) · in/out - 0.5, clamped to the edge).
Tensor resize_bilinear(const Tensor& chw, std::size_t out_h, std::size_t out_w);

/// Decode, resize to size×size, scale to [0,1].
Tensor load_image(const std::string& path, std::size_t size);

}  // namespace ogaw::image
