#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdlab {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Planar raster with 1 (gray) or 3 (RGB / YCbCr) channels. Samples are real
// valued and always kept inside [0, 255].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t sample_count() const { return plane_size() * channels_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  double at(int c, int x, int y) const { return data_[index(c, x, y)]; }
  // Clamps to [0, 255].
  void set(int c, int x, int y, double v);

  std::span<const double> plane(int c) const;
  std::span<double> plane_mut(int c);
  std::span<const double> samples() const { return data_; }

  // Direct mutable access for bulk writers; callers must call clamp() if
  // they may leave the valid range.
  std::span<double> samples_mut() { return data_; }
  void clamp();
  void round_to_integers();

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }
  bool operator==(const Image& other) const = default;

 private:
  std::size_t index(int c, int x, int y) const {
    return static_cast<std::size_t>(c) * plane_size() +
           static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// PSNR in dB. Zero MSE is the distinguished lossless state, which orders
// above every finite value.
class Decibels {
 public:
  static Decibels lossless() { return Decibels(true, 0.0); }
  static Decibels finite(double value);

  bool is_lossless() const { return lossless_; }
  // Infinity for the lossless state.
  double value() const;

  std::partial_ordering operator<=>(const Decibels& other) const;
  bool operator==(const Decibels& other) const = default;

  std::string to_string() const;

 private:
  Decibels(bool lossless, double value) : lossless_(lossless), value_(value) {}
  bool lossless_ = false;
  double value_ = 0.0;
};

double mse(const Image& reference, const Image& test);
Decibels psnr(const Image& reference, const Image& test);
Decibels psnr_from_mse(double mse);

// Full-range BT.601.
Image rgb_to_ycbcr(const Image& img);
Image ycbcr_to_rgb(const Image& img);

// Rounds width and height up to multiples of n by edge replication.
Image pad_to_multiple(const Image& img, int n);
Image crop(const Image& img, int width, int height);

// 2x2 box average of one plane (dims must be even) and its replication inverse.
Image downsample2(const Image& plane);
Image upsample2(const Image& plane, int width, int height);

// Single-plane extraction and assembly.
Image extract_channel(const Image& img, int c);
Image merge_channels(std::span<const Image> planes);

// Mean |neighbour difference| across 8-aligned block boundaries minus the
// same statistic at interior positions, clamped at 0. Luma plane only.
double blockiness(const Image& img);

}  // namespace cdlab
