#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cdlab/embedded.hpp"
#include "cdlab/image.hpp"

namespace cdlab {

enum class Codec { dct, wavelet };

std::string_view codec_name(Codec c);
Codec parse_codec(std::string_view name);  // "dct" or "wavelet"; ParameterError otherwise

struct RateTarget {
  Decibels target_db = Decibels::finite(30.0);
  double tolerance_db = 0.01;
  // PSNR is measured against this image when set, otherwise against the
  // image being compressed.
  std::optional<Image> reference;
};

// Thrown when the target lies outside what the codec can reach on this image.
class InfeasibleTarget : public std::runtime_error {
 public:
  InfeasibleTarget(Decibels target, Decibels lowest, Decibels highest);
  Decibels target, lowest, highest;
};

struct CompressionResult {
  Codec codec = Codec::dct;
  std::vector<std::uint8_t> stream;  // serialized DCX1 or WVX1 file
  Image decoded;
  Decibels achieved_db = Decibels::lossless();
  std::size_t byte_size = 0;
  bool exact_hit = false;
  double multiplier = 0.0;   // DCT only
  std::uint64_t offset = 0;  // wavelet only
  int evaluations = 0;       // codec runs spent by the search
};

struct DctRateOptions {
  double m_min = 0.05;
  double m_max = 256.0;
  int max_evaluations = 60;
  bool subsample = false;
};

struct WaveletRateOptions {
  EmbeddedOptions encoder{};
  double tolerance_db = 0.25;
};

CompressionResult compress_to_psnr_dct(const Image& img, const RateTarget& target, const DctRateOptions& options = {});
CompressionResult compress_to_psnr_wavelet(const Image& img, const RateTarget& target,
                                           const WaveletRateOptions& options = {});
CompressionResult compress_to_psnr(Codec codec, const Image& img, const RateTarget& target);

// Smallest stream each codec allows.
CompressionResult compress_max(const Image& img, Codec codec, const std::optional<Image>& reference = std::nullopt);

// Decodes a serialized stream of either format, picked by its magic.
Image decode_any(const std::vector<std::uint8_t>& bytes);

// Exact-offset wavelet result from an already encoded stream.
CompressionResult wavelet_result_at(const EmbeddedStream& full, std::uint64_t offset, const Image& reference);
// Target selection on an existing encoding of img; lets several targets share one encode.
CompressionResult wavelet_select(const EmbeddedStream& full, const Image& img, const RateTarget& target,
                                 double tolerance_db = 0.25);

}  // namespace cdlab
