#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ogaw/tensor.hpp"

namespace ogaw::wavelet {

/// Orthonormal analysis/synthesis filter quadruple.
///
/// dec_hi is the quadrature mirror of dec_lo (dec_hi[k] = (-1)^k dec_lo[L-1-k]);
/// the synthesis filters are the time reversals of the analysis filters.
struct FilterBank {
  std::string name;
  std::vector<double> dec_lo, dec_hi, rec_lo, rec_hi;

  std::size_t length() const { return dec_lo.size(); }

  static const FilterBank& haar();
  static const FilterBank& db2();
  /// "haar" or "db2"; anything else is a ValidationError.
  static const FilterBank& by_name(std::string_view name);
};

/// One row-major coefficient plane.
struct Plane {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

enum class Kind { DWT, SWT };
enum class Band { LL, LH, HL, HH };

std::string_view band_name(Band band);

/// Detail planes of one level. The first letter names the filter applied
/// along rows (horizontal), the second the one along columns: LH is
/// row-lowpass then column-highpass.
struct DetailLevel {
  Plane lh, hl, hh;
};

/// Multi-level decomposition of one image plane with periodic boundaries.
/// details[j-1] holds level j; approx is the level-J LL plane.
struct SubbandPyramid {
  Kind kind = Kind::DWT;
  std::size_t levels = 0;
  std::size_t source_rows = 0, source_cols = 0;
  std::vector<DetailLevel> details;
  Plane approx;

  const Plane& plane(std::size_t level, Band band) const;
  /// Sum of squared coefficients over every plane.
  double energy() const;
};

/// One Mallat analysis step with periodic extension:
/// approx[i] = sum_k dec_lo[k] * signal[(2i+k) mod n]; likewise detail with dec_hi.
std::pair<std::vector<double>, std::vector<double>> dwt1d(std::span<const double> signal, const FilterBank& bank);

/// Synthesis step; exact inverse of dwt1d for the bundled banks.
std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail, const FilterBank& bank);

/// Separable decimated transform of every channel of image[C,H,W]; rows are
/// filtered before columns and each level recurses on LL.
std::vector<SubbandPyramid> dwt2d(const Tensor& image, const FilterBank& bank, std::size_t levels);

/// Inverse of dwt2d; returns [C,H,W].
Tensor idwt2d(std::span<const SubbandPyramid> pyramids, const FilterBank& bank);

/// Undecimated (à trous) transform: at level j the filters are dilated by
/// 2^(j-1) and nothing is downsampled, so every plane is H×W.
std::vector<SubbandPyramid> swt2d(const Tensor& image, const FilterBank& bank, std::size_t levels);

}  // namespace ogaw::wavelet
