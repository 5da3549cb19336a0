#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cdlab/image.hpp"

namespace cdlab {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace dct {

// Row-major 8x8, index = row * 8 + col.
using Block = std::array<double, 64>;
using QBlock = std::array<int, 64>;

enum class TableKind { luminance, chrominance };

// Base table scaled by a continuous multiplier:
//   step = clamp(base * multiplier, 1, 32767)
// Steps stay real-valued so distortion moves smoothly with the multiplier.
class QuantTable {
 public:
  QuantTable(TableKind kind, double multiplier);

  double step(int index) const { return steps_[static_cast<std::size_t>(index)]; }
  double multiplier() const { return multiplier_; }
  const std::array<double, 64>& steps() const { return steps_; }

  static const std::array<int, 64>& base(TableKind kind);

 private:
  double multiplier_;
  std::array<double, 64> steps_{};
};

// T.81 forward DCT with the -128 level shift applied internally.
Block fdct8x8(const Block& samples);
// Inverse including the +128 shift; output is not clamped.
Block idct8x8(const Block& coeffs);

QBlock quantize_block(const Block& coeffs, const QuantTable& table);
Block dequantize_block(const QBlock& q, const QuantTable& table);

// Source (row-major) position of the k-th zigzag element.
const std::array<int, 64>& zigzag_order();

template <typename T>
std::array<T, 64> zigzag(const std::array<T, 64>& grid) {
  std::array<T, 64> out{};
  const auto& order = zigzag_order();
  for (int k = 0; k < 64; ++k) out[k] = grid[order[k]];
  return out;
}

template <typename T>
std::array<T, 64> inverse_zigzag(const std::array<T, 64>& seq) {
  std::array<T, 64> out{};
  const auto& order = zigzag_order();
  for (int k = 0; k < 64; ++k) out[order[k]] = seq[k];
  return out;
}

// Quantized coefficients of one encoded plane, blocks in raster order.
struct PlaneCoefficients {
  int width = 0;  // padded plane width (multiple of 8)
  int height = 0;
  std::vector<QBlock> blocks;
};

}  // namespace dct

struct DctStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t channels = 1;
  bool subsample = false;
  double multiplier = 1.0;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> serialize() const;
  static DctStream parse(const std::vector<std::uint8_t>& bytes);
  std::size_t byte_size() const { return kHeaderBytes + payload.size(); }

  static constexpr std::size_t kHeaderBytes = 30;
};

DctStream encode_dct(const Image& img, double multiplier, bool subsample = false);
Image decode_dct(const DctStream& stream);

// Transform, quantize, dequantize, inverse; no entropy stage.
Image dct_quantize_only(const Image& img, double multiplier, bool subsample = false);

// Pre-entropy reference: the quantized coefficients encode_dct would code.
std::vector<dct::PlaneCoefficients> dct_quantized_planes(const Image& img, double multiplier, bool subsample = false);
// Entropy-decodes a stream back to quantized coefficients.
std::vector<dct::PlaneCoefficients> decode_dct_coefficients(const DctStream& stream);

}  // namespace cdlab
