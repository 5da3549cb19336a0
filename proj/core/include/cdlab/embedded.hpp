#pragma once

#include <cstdint>
#include <vector>

#include "cdlab/image.hpp"
#include "cdlab/wavelet.hpp"

namespace cdlab {

struct TruncationPoint {
  std::uint64_t offset = 0;  // payload bytes
  double mse = 0.0;          // of the reconstruction decoded from that prefix
};

// Wavelet-coded stream with recorded truncation points. Every listed offset
// is a payload prefix that decodes on its own.
struct EmbeddedStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t padded_width = 0;
  std::uint32_t padded_height = 0;
  std::uint8_t channels = 1;
  wavelet::Filter filter = wavelet::Filter::irreversible97;
  std::uint8_t levels = 1;
  double base_step = 1.0;
  std::vector<TruncationPoint> truncation;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> serialize() const;
  static EmbeddedStream parse(const std::vector<std::uint8_t>& bytes);
  std::size_t byte_size() const;

  // Self-contained stream cut at one of the recorded offsets; its table keeps
  // only that terminal point.
  EmbeddedStream truncated(std::uint64_t offset) const;

  // Per-band quantizer step, in pyramid band order.
  std::vector<double> band_steps() const;
};

struct EmbeddedOptions {
  int levels = 0;  // 0 = min(5, maximum permitted by the image size)
  wavelet::Filter filter = wavelet::Filter::irreversible97;
  double base_step = 1.0 / 64.0;
  // Minimum estimated PSNR gain between consecutive truncation points.
  double point_spacing_db = 0.1;
  std::size_t max_points = 1024;
  // Worker threads for truncation-table measurement; 0 = hardware concurrency.
  unsigned workers = 1;
};

int default_levels(int width, int height);

EmbeddedStream encode_embedded(const Image& img, const EmbeddedOptions& options = {});
Image decode_embedded(const EmbeddedStream& stream, std::uint64_t at_offset);
Image decode_embedded(const EmbeddedStream& stream);  // final offset

// decompose, dead-zone quantize, midpoint dequantize, reconstruct.
Image wavelet_quantize_only(const Image& img, int levels, wavelet::Filter filter, double base_step);

}  // namespace cdlab
