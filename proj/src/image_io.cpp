#include "ogaw/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "ogaw/error.hpp"

namespace ogaw::image {

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

}  // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space();
    std::size_t v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) throw IoError("pnm: malformed header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw IoError("pnm: only binary P6/P5 files are supported");
  }
  Image img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  img.width = read_int();
  img.height = read_int();
  const std::size_t maxval = read_int();
  if (maxval == 0 || maxval > 255) {
    throw IoError("pnm: unsupported bit depth (maxval " + std::to_string(maxval) + "); only 8-bit is read");
  }
  ++pos;  // single whitespace before raster
  const std::size_t need = img.width * img.height * img.channels;
  if (img.width == 0 || img.height == 0 || bytes.size() < pos + need) throw IoError("pnm: truncated raster");
  img.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  if (maxval != 255) {
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
  }
  return img;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kPngSignature, kPngSignature + 8, bytes.begin())) {
    throw IoError("png: bad signature");
  }
  std::size_t pos = 8;
  Image img;
  int bit_depth = 0, color_type = -1, interlace = 0;
  std::vector<std::uint8_t> idat;
  bool seen_end = false;
  while (pos + 12 <= bytes.size() && !seen_end) {
    const std::uint32_t len = read_be32(&bytes[pos]);
    const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    if (pos + 12 + len > bytes.size()) throw IoError("png: truncated chunk " + type);
    const std::uint8_t* data = &bytes[pos + 8];
    if (type == "IHDR") {
      if (len != 13) throw IoError("png: bad IHDR");
      img.width = read_be32(data);
      img.height = read_be32(data + 4);
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      seen_end = true;
    }
    pos += 12 + len;
  }
  if (color_type < 0 || img.width == 0 || img.height == 0) throw IoError("png: missing IHDR");
  if (bit_depth != 8) throw IoError("png: unsupported bit depth " + std::to_string(bit_depth) + " (only 8-bit)");
  if (interlace != 0) throw IoError("png: interlaced images are not supported");
  switch (color_type) {
    case 0: img.channels = 1; break;
    case 2: img.channels = 3; break;
    case 4: img.channels = 2; break;
    case 6: img.channels = 4; break;
    default: throw IoError("png: unsupported color type " + std::to_string(color_type));
  }
  const std::size_t stride = img.width * img.channels;
  std::vector<std::uint8_t> raw(img.height * (stride + 1));
  uLongf raw_len = raw.size();
  if (uncompress(raw.data(), &raw_len, idat.data(), idat.size()) != Z_OK || raw_len != raw.size()) {
    throw IoError("png: corrupt image data");
  }
  img.pixels.assign(img.height * stride, 0);
  const std::size_t bpp = img.channels;
  for (std::size_t y = 0; y < img.height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* cur = &img.pixels[y * stride];
    const std::uint8_t* prev = y ? &img.pixels[(y - 1) * stride] : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= bpp ? cur[x - bpp] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = (prev && x >= bpp) ? prev[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw IoError("png: unknown filter type " + std::to_string(filter));
      }
      cur[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return img;
}

Image decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(kPngSignature, kPngSignature + 8, bytes.begin())) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes);
  throw IoError("unsupported image format (expected PNG or binary PPM/PGM)");
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  if (image.channels != 3) throw ValidationError("ppm: encoder expects 3-channel images");
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  int color_type = 0;
  switch (image.channels) {
    case 1: color_type = 0; break;
    case 2: color_type = 4; break;
    case 3: color_type = 2; break;
    case 4: color_type = 6; break;
    default: throw ValidationError("png: unsupported channel count");
  }
  const std::size_t stride = image.width * image.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve(image.height * (stride + 1));
  for (std::size_t y = 0; y < image.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), image.pixels.begin() + y * stride, image.pixels.begin() + (y + 1) * stride);
  }
  uLongf zlen = compressBound(raw.size());
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), raw.size(), 9) != Z_OK) throw IoError("png: compression failed");
  z.resize(zlen);

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  auto chunk = [&](const char* type, const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_be32(out, static_cast<std::uint32_t>(crc));
  };
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(image.width));
  put_be32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.insert(ihdr.end(), {8, static_cast<std::uint8_t>(color_type), 0, 0, 0});
  chunk("IHDR", ihdr);
  chunk("IDAT", z);
  chunk("IEND", {});
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

Tensor to_tensor(const Image& image) {
  const std::size_t h = image.height, w = image.width, ch = image.channels;
  std::vector<double> out(3 * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t* px = &image.pixels[(y * w + x) * ch];
      for (std::size_t c = 0; c < 3; ++c) {
        const std::uint8_t v = ch >= 3 ? px[c] : px[0];
        out[(c * h + y) * w + x] = v / 255.0;
      }
    }
  return Tensor(Shape{3, h, w}, std::move(out));
}

Tensor resize_bilinear(const Tensor& chw, std::size_t out_h, std::size_t out_w) {
  if (chw.rank() != 3) throw DimensionError("resize: expected [C,H,W], got " + shape_string(chw.shape()));
  const std::size_t c = chw.dim(0), in_h = chw.dim(1), in_w = chw.dim(2);
  if (in_h == out_h && in_w == out_w) return chw.detach();
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[i] = Tap{lo, hi, src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h), tx = taps(in_w, out_w);
  auto d = chw.data();
  std::vector<double> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = d.data() + ch * in_h * in_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const auto& a = ty[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const auto& b = tx[x];
        const double top = plane[a.lo * in_w + b.lo] * (1.0 - b.frac) + plane[a.lo * in_w + b.hi] * b.frac;
        const double bottom = plane[a.hi * in_w + b.lo] * (1.0 - b.frac) + plane[a.hi * in_w + b.hi] * b.frac;
        out[(ch * out_h + y) * out_w + x] = top * (1.0 - a.frac) + bottom * a.frac;
      }
    }
  }
  return Tensor(Shape{c, out_h, out_w}, std::move(out));
}

Tensor load_image(const std::string& path, std::size_t size) {
  Image img = decode(read_file(path));
  return resize_bilinear(to_tensor(img), size, size);
}

}  // namespace ogaw::image
