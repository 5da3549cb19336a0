#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cdlab/image.hpp"

namespace cdlab::wavelet {

enum class Filter : std::uint8_t { reversible53 = 0, irreversible97 = 1 };

// Lifting constants of the irreversible CDF 9/7 filter bank.
inline constexpr double kAlpha = -1.586134342;
inline constexpr double kBeta = -0.052980118;
inline constexpr double kGamma = 0.882911076;
inline constexpr double kDelta = 0.443506852;
inline constexpr double kScale = 1.230174105;

// One analysis step on a 1-D signal with whole-sample symmetric extension.
// approx receives ceil(n/2) samples, detail floor(n/2). n must be >= 2.
void forward53(std::span<const double> x, std::span<double> approx, std::span<double> detail);
void inverse53(std::span<const double> approx, std::span<const double> detail, std::span<double> x);
void forward97(std::span<const double> x, std::span<double> approx, std::span<double> detail);
void inverse97(std::span<const double> approx, std::span<const double> detail, std::span<double> x);

struct Split {
  std::vector<double> approx;
  std::vector<double> detail;
};

Split dwt53_1d(std::span<const double> signal);
std::vector<double> idwt53_1d(const Split& split);
Split dwt97_1d(std::span<const double> signal);
std::vector<double> idwt97_1d(const Split& split);

enum class Orientation : std::uint8_t { LL, HL, LH, HH };

struct Subband {
  int level = 0;  // 1 = finest
  Orientation orientation = Orientation::LL;
  int width = 0;
  int height = 0;
  // Squared L2 norm of the synthesis basis function.
  double weight = 1.0;
  std::vector<double> coeffs;
};

// Coarsest LL first, then HL/LH/HH from level L down to level 1.
struct SubbandPyramid {
  int levels = 0;
  Filter filter = Filter::irreversible97;
  int width = 0;
  int height = 0;
  std::vector<Subband> bands;

  std::size_t coefficient_count() const;
};

int max_levels(int width, int height);

// Subband energy weights for a given filter and level count, in pyramid band
// order. Unit weights for 5/3.
std::vector<double> subband_weights(Filter filter, int levels);

// Rows then columns at each level, recursing on LL. Dimensions must be
// multiples of 2^levels and levels <= floor(log2(min(w, h))).
SubbandPyramid decompose(std::span<const double> plane, int width, int height, int levels, Filter filter);
SubbandPyramid decompose(const Image& plane, int levels, Filter filter);
std::vector<double> reconstruct(const SubbandPyramid& pyramid);

}  // namespace cdlab::wavelet
