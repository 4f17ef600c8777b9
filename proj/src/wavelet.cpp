#include "ogaw/wavelet.hpp"

#include <cmath>
#include <numbers>

#include "ogaw/error.hpp"

namespace ogaw::wavelet {

namespace {

FilterBank make_bank(std::string name, std::vector<double> lo) {
  FilterBank bank;
  bank.name = std::move(name);
  const std::size_t len = lo.size();
  bank.dec_lo = lo;
  bank.dec_hi.resize(len);
  for (std::size_t k = 0; k < len; ++k) {
    bank.dec_hi[k] = (k % 2 == 0 ? 1.0 : -1.0) * lo[len - 1 - k];
  }
  bank.rec_lo.assign(bank.dec_lo.rbegin(), bank.dec_lo.rend());
  bank.rec_hi.assign(bank.dec_hi.rbegin(), bank.dec_hi.rend());
  return bank;
}

// Filters a strided line of length n in place of `out_lo`/`out_hi`.
// step = 2 decimates (DWT), step = 1 keeps every position (SWT) with the
// filter taps spread `dilation` samples apart.
void analyze_line(const double* in, std::size_t n, std::size_t in_stride, const FilterBank& bank, std::size_t step,
                  std::size_t dilation, double* out_lo, double* out_hi, std::size_t out_stride) {
  const std::size_t len = bank.length();
  const std::size_t outputs = n / step;
  for (std::size_t i = 0; i < outputs; ++i) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double v = in[((step * i + k * dilation) % n) * in_stride];
      lo += bank.dec_lo[k] * v;
      hi += bank.dec_hi[k] * v;
    }
    out_lo[i * out_stride] = lo;
    out_hi[i * out_stride] = hi;
  }
}

// Adjoint of the decimated analyze_line; accumulates into out (length 2m).
void synthesize_line(const double* lo, const double* hi, std::size_t m, std::size_t in_stride, const FilterBank& bank,
                     double* out, std::size_t out_stride) {
  const std::size_t n = 2 * m;
  const std::size_t len = bank.length();
  for (std::size_t i = 0; i < n; ++i) out[i * out_stride] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = lo[i * in_stride];
    const double d = hi[i * in_stride];
    for (std::size_t k = 0; k < len; ++k) {
      out[((2 * i + k) % n) * out_stride] += bank.rec_lo[len - 1 - k] * a + bank.rec_hi[len - 1 - k] * d;
    }
  }
}

struct Quad {
  Plane ll, lh, hl, hh;
};

// One separable 2D level: rows first, then columns.
Quad analyze_plane(const Plane& src, const FilterBank& bank, Kind kind, std::size_t dilation) {
  const std::size_t step = kind == Kind::DWT ? 2 : 1;
  const std::size_t out_cols = src.cols / step, out_rows = src.rows / step;
  Plane row_lo(src.rows, out_cols), row_hi(src.rows, out_cols);
  for (std::size_t r = 0; r < src.rows; ++r) {
    analyze_line(&src.values[r * src.cols], src.cols, 1, bank, step, dilation, &row_lo.values[r * out_cols],
                 &row_hi.values[r * out_cols], 1);
  }
  Quad q{Plane(out_rows, out_cols), Plane(out_rows, out_cols), Plane(out_rows, out_cols), Plane(out_rows, out_cols)};
  for (std::size_t c = 0; c < out_cols; ++c) {
    analyze_line(&row_lo.values[c], src.rows, out_cols, bank, step, dilation, &q.ll.values[c], &q.lh.values[c],
                 out_cols);
    analyze_line(&row_hi.values[c], src.rows, out_cols, bank, step, dilation, &q.hl.values[c], &q.hh.values[c],
                 out_cols);
  }
  return q;
}

Plane synthesize_plane(const Plane& ll, const DetailLevel& det, const FilterBank& bank) {
  const std::size_t m_rows = ll.rows, m_cols = ll.cols;
  Plane row_lo(2 * m_rows, m_cols), row_hi(2 * m_rows, m_cols);
  for (std::size_t c = 0; c < m_cols; ++c) {
    synthesize_line(&ll.values[c], &det.lh.values[c], m_rows, m_cols, bank, &row_lo.values[c], m_cols);
    synthesize_line(&det.hl.values[c], &det.hh.values[c], m_rows, m_cols, bank, &row_hi.values[c], m_cols);
  }
  Plane out(2 * m_rows, 2 * m_cols);
  for (std::size_t r = 0; r < 2 * m_rows; ++r) {
    synthesize_line(&row_lo.values[r * m_cols], &row_hi.values[r * m_cols], m_cols, 1, bank,
                    &out.values[r * 2 * m_cols], 1);
  }
  return out;
}

Plane channel_plane(const Tensor& image, std::size_t channel) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  Plane p(h, w);
  auto d = image.data();
  std::copy_n(d.begin() + channel * h * w, h * w, p.values.begin());
  return p;
}

void require_image(const Tensor& image, const char* op) {
  if (image.rank() != 3) {
    throw DimensionError(std::string(op) + ": image must be [C,H,W], got " + shape_string(image.shape()));
  }
}

}  // namespace

const FilterBank& FilterBank::haar() {
  static const FilterBank bank = make_bank("haar", {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0});
  return bank;
}

const FilterBank& FilterBank::db2() {
  static const FilterBank bank = [] {
    const double s3 = std::sqrt(3.0);
    const double d = 4.0 * std::numbers::sqrt2;
    return make_bank("db2", {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d});
  }();
  return bank;
}

const FilterBank& FilterBank::by_name(std::string_view name) {
  if (name == "haar") return haar();
  if (name == "db2") return db2();
  throw ValidationError("unknown wavelet '" + std::string(name) + "' (expected haar or db2)");
}

std::string_view band_name(Band band) {
  switch (band) {
    case Band::LL: return "LL";
    case Band::LH: return "LH";
    case Band::HL: return "HL";
    case Band::HH: return "HH";
  }
  return "??";
}

const Plane& SubbandPyramid::plane(std::size_t level, Band band) const {
  if (level < 1 || level > levels) throw ValidationError("pyramid has no level " + std::to_string(level));
  switch (band) {
    case Band::LL:
      if (level != levels) throw ValidationError("LL is stored for the final level only");
      return approx;
    case Band::LH: return details[level - 1].lh;
    case Band::HL: return details[level - 1].hl;
    case Band::HH: return details[level - 1].hh;
  }
  return approx;
}

double SubbandPyramid::energy() const {
  double total = 0.0;
  auto add = [&](const Plane& p) {
    for (double v : p.values) total += v * v;
  };
  for (const auto& d : details) {
    add(d.lh);
    add(d.hl);
    add(d.hh);
  }
  add(approx);
  return total;
}

std::pair<std::vector<double>, std::vector<double>> dwt1d(std::span<const double> signal, const FilterBank& bank) {
  const std::size_t n = signal.size();
  if (n % 2 != 0) {
    throw ValidationError("dwt1d: signal length " + std::to_string(n) + " is odd; pad it to an even length first");
  }
  if (n < bank.length()) {
    throw ValidationError("dwt1d: signal length " + std::to_string(n) + " is shorter than the " + bank.name +
                          " filter (" + std::to_string(bank.length()) + ")");
  }
  std::vector<double> approx(n / 2), detail(n / 2);
  analyze_line(signal.data(), n, 1, bank, 2, 1, approx.data(), detail.data(), 1);
  return {std::move(approx), std::move(detail)};
}

std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail, const FilterBank& bank) {
  if (approx.size() != detail.size()) {
    throw ValidationError("idwt1d: approximation length " + std::to_string(approx.size()) +
                          " differs from detail length " + std::to_string(detail.size()));
  }
  std::vector<double> out(2 * approx.size());
  synthesize_line(approx.data(), detail.data(), approx.size(), 1, bank, out.data(), 1);
  return out;
}

std::vector<SubbandPyramid> dwt2d(const Tensor& image, const FilterBank& bank, std::size_t levels) {
  require_image(image, "dwt2d");
  if (levels < 1) throw ValidationError("dwt2d: levels must be at least 1");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t divisor = std::size_t{1} << levels;
  if (h % divisor != 0 || w % divisor != 0) {
    throw ValidationError("dwt2d: extents " + std::to_string(h) + "x" + std::to_string(w) + " must be divisible by " +
                          std::to_string(divisor) + " for " + std::to_string(levels) + " levels");
  }
  if (h / (divisor / 2) < bank.length() || w / (divisor / 2) < bank.length()) {
    throw ValidationError("dwt2d: level-" + std::to_string(levels) + " input is shorter than the " + bank.name +
                          " filter");
  }
  std::vector<SubbandPyramid> out;
  out.reserve(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    SubbandPyramid pyr;
    pyr.kind = Kind::DWT;
    pyr.levels = levels;
    pyr.source_rows = h;
    pyr.source_cols = w;
    Plane current = channel_plane(image, ch);
    for (std::size_t j = 1; j <= levels; ++j) {
      Quad q = analyze_plane(current, bank, Kind::DWT, 1);
      pyr.details.push_back(DetailLevel{std::move(q.lh), std::move(q.hl), std::move(q.hh)});
      current = std::move(q.ll);
    }
    pyr.approx = std::move(current);
    out.push_back(std::move(pyr));
  }
  return out;
}

Tensor idwt2d(std::span<const SubbandPyramid> pyramids, const FilterBank& bank) {
  if (pyramids.empty()) throw ValidationError("idwt2d: no pyramids");
  const std::size_t h = pyramids[0].source_rows, w = pyramids[0].source_cols;
  std::vector<double> out(pyramids.size() * h * w);
  for (std::size_t ch = 0; ch < pyramids.size(); ++ch) {
    const auto& pyr = pyramids[ch];
    if (pyr.kind != Kind::DWT) throw ValidationError("idwt2d: pyramid " + std::to_string(ch) + " is not a DWT");
    if (pyr.source_rows != h || pyr.source_cols != w || pyr.details.size() != pyr.levels) {
      throw DimensionError("idwt2d: pyramid " + std::to_string(ch) + " does not match the first pyramid's shape");
    }
    Plane current = pyr.approx;
    for (std::size_t j = pyr.levels; j >= 1; --j) {
      const auto& det = pyr.details[j - 1];
      if (det.lh.rows != current.rows || det.lh.cols != current.cols) {
        throw DimensionError("idwt2d: level " + std::to_string(j) + " planes do not match the approximation");
      }
      current = synthesize_plane(current, det, bank);
    }
    std::copy(current.values.begin(), current.values.end(), out.begin() + ch * h * w);
  }
  return Tensor(Shape{pyramids.size(), h, w}, std::move(out));
}

std::vector<SubbandPyramid> swt2d(const Tensor& image, const FilterBank& bank, std::size_t levels) {
  require_image(image, "swt2d");
  if (levels < 1) throw ValidationError("swt2d: levels must be at least 1");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t dilated = (bank.length() - 1) * (std::size_t{1} << (levels - 1)) + 1;
  if (h < dilated || w < dilated) {
    throw ValidationError("swt2d: image " + std::to_string(h) + "x" + std::to_string(w) +
                          " is smaller than the level-" + std::to_string(levels) + " dilated filter (" +
                          std::to_string(dilated) + " taps)");
  }
  std::vector<SubbandPyramid> out;
  out.reserve(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    SubbandPyramid pyr;
    pyr.kind = Kind::SWT;
    pyr.levels = levels;
    pyr.source_rows = h;
    pyr.source_cols = w;
    Plane current = channel_plane(image, ch);
    for (std::size_t j = 1; j <= levels; ++j) {
      Quad q = analyze_plane(current, bank, Kind::SWT, std::size_t{1} << (j - 1));
      pyr.details.push_back(DetailLevel{std::move(q.lh), std::move(q.hl), std::move(q.hh)});
      current = std::move(q.ll);
    }
    pyr.approx = std::move(current);
    out.push_back(std::move(pyr));
  }
  return out;
}

}  // namespace ogaw::wavelet
