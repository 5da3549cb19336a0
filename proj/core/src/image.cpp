#include "cdlab/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cdlab {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw ShapeError("negative image dimensions");
  if (channels != 1 && channels != 3) throw ShapeError("channels must be 1 or 3");
  data_.assign(sample_count(), std::clamp(fill, 0.0, 255.0));
}

void Image::set(int c, int x, int y, double v) { data_[index(c, x, y)] = std::clamp(v, 0.0, 255.0); }

std::span<const double> Image::plane(int c) const {
  return std::span<const double>(data_).subspan(c * plane_size(), plane_size());
}

std::span<double> Image::plane_mut(int c) {
  return std::span<double>(data_).subspan(c * plane_size(), plane_size());
}

void Image::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 255.0);
}

void Image::round_to_integers() {
  for (double& v : data_) v = std::clamp(std::round(v), 0.0, 255.0);
}

Decibels Decibels::finite(double value) {
  if (!std::isfinite(value) || value < 0.0) throw ParameterError("decibel value must be finite and >= 0");
  return Decibels(false, value);
}

double Decibels::value() const {
  return lossless_ ? std::numeric_limits<double>::infinity() : value_;
}

std::partial_ordering Decibels::operator<=>(const Decibels& other) const {
  if (lossless_ && other.lossless_) return std::partial_ordering::equivalent;
  if (lossless_) return std::partial_ordering::greater;
  if (other.lossless_) return std::partial_ordering::less;
  return value_ <=> other.value_;
}

std::string Decibels::to_string() const {
  if (lossless_) return "lossless";
  std::ostringstream os;
  os << value_;
  return os.str();
}

double mse(const Image& reference, const Image& test) {
  if (!reference.same_shape(test)) throw ShapeError("psnr: image shapes differ");
  if (reference.sample_count() == 0) throw ShapeError("psnr: empty images");
  auto a = reference.samples();
  auto b = test.samples();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

Decibels psnr_from_mse(double m) {
  if (m <= 0.0) return Decibels::lossless();
  // MSE never exceeds 255^2 for in-range images, so the value is >= 0.
  return Decibels::finite(std::max(0.0, 10.0 * std::log10(255.0 * 255.0 / m)));
}

Decibels psnr(const Image& reference, const Image& test) { return psnr_from_mse(mse(reference, test)); }

Image rgb_to_ycbcr(const Image& img) {
  if (img.channels() != 3) throw ShapeError("rgb_to_ycbcr: expected 3 channels");
  Image out(img.width(), img.height(), 3);
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  auto y = out.plane_mut(0), cb = out.plane_mut(1), cr = out.plane_mut(2);
  for (std::size_t i = 0; i < img.plane_size(); ++i) {
    y[i] = std::clamp(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i], 0.0, 255.0);
    cb[i] = std::clamp(128.0 - 0.168735892 * r[i] - 0.331264108 * g[i] + 0.5 * b[i], 0.0, 255.0);
    cr[i] = std::clamp(128.0 + 0.5 * r[i] - 0.418687589 * g[i] - 0.081312411 * b[i], 0.0, 255.0);
  }
  return out;
}

Image ycbcr_to_rgb(const Image& img) {
  if (img.channels() != 3) throw ShapeError("ycbcr_to_rgb: expected 3 channels");
  Image out(img.width(), img.height(), 3);
  auto y = img.plane(0), cb = img.plane(1), cr = img.plane(2);
  auto r = out.plane_mut(0), g = out.plane_mut(1), b = out.plane_mut(2);
  for (std::size_t i = 0; i < img.plane_size(); ++i) {
    const double pb = cb[i] - 128.0;
    const double pr = cr[i] - 128.0;
    r[i] = std::clamp(y[i] + 1.402 * pr, 0.0, 255.0);
    g[i] = std::clamp(y[i] - 0.344136286 * pb - 0.714136286 * pr, 0.0, 255.0);
    b[i] = std::clamp(y[i] + 1.772 * pb, 0.0, 255.0);
  }
  return out;
}

Image pad_to_multiple(const Image& img, int n) {
  if (n < 1) throw ParameterError("pad_to_multiple: n must be >= 1");
  const int w = (img.width() + n - 1) / n * n;
  const int h = (img.height() + n - 1) / n * n;
  if (w == img.width() && h == img.height()) return img;
  Image out(w, h, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    auto dst = out.plane_mut(c);
    for (int y = 0; y < h; ++y) {
      const int sy = std::min(y, img.height() - 1);
      for (int x = 0; x < w; ++x) {
        const int sx = std::min(x, img.width() - 1);
        dst[static_cast<std::size_t>(y) * w + x] = src[static_cast<std::size_t>(sy) * img.width() + sx];
      }
    }
  }
  return out;
}

Image crop(const Image& img, int width, int height) {
  if (width > img.width() || height > img.height() || width < 0 || height < 0)
    throw ShapeError("crop: region exceeds image");
  if (width == img.width() && height == img.height()) return img;
  Image out(width, height, img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    auto src = img.plane(c);
    auto dst = out.plane_mut(c);
    for (int y = 0; y < height; ++y)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(y) * img.width(), width,
                  dst.begin() + static_cast<std::ptrdiff_t>(y) * width);
  }
  return out;
}

Image downsample2(const Image& p) {
  if (p.channels() != 1 || p.width() % 2 || p.height() % 2)
    throw ShapeError("downsample2: expected a single plane with even dimensions");
  Image out(p.width() / 2, p.height() / 2, 1);
  auto src = p.plane(0);
  auto dst = out.plane_mut(0);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(2 * y) * p.width() + 2 * x;
      dst[static_cast<std::size_t>(y) * out.width() + x] =
          0.25 * (src[i] + src[i + 1] + src[i + p.width()] + src[i + p.width() + 1]);
    }
  return out;
}

Image upsample2(const Image& p, int width, int height) {
  if (p.channels() != 1) throw ShapeError("upsample2: expected a single plane");
  Image out(width, height, 1);
  auto src = p.plane(0);
  auto dst = out.plane_mut(0);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(y / 2, p.height() - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(x / 2, p.width() - 1);
      dst[static_cast<std::size_t>(y) * width + x] = src[static_cast<std::size_t>(sy) * p.width() + sx];
    }
  }
  return out;
}

Image extract_channel(const Image& img, int c) {
  if (c < 0 || c >= img.channels()) throw ShapeError("extract_channel: bad channel");
  Image out(img.width(), img.height(), 1);
  std::ranges::copy(img.plane(c), out.plane_mut(0).begin());
  return out;
}

Image merge_channels(std::span<const Image> planes) {
  if (planes.size() != 1 && planes.size() != 3) throw ShapeError("merge_channels: need 1 or 3 planes");
  const int w = planes[0].width(), h = planes[0].height();
  Image out(w, h, static_cast<int>(planes.size()));
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (planes[c].width() != w || planes[c].height() != h || planes[c].channels() != 1)
      throw ShapeError("merge_channels: plane shapes differ");
    std::ranges::copy(planes[c].plane(0), out.plane_mut(static_cast<int>(c)).begin());
  }
  return out;
}

double blockiness(const Image& img) {
  if (img.width() < 9 || img.height() < 9) throw ShapeError("blockiness: image must be at least 9x9");
  const Image luma_src = img.channels() == 3 ? rgb_to_ycbcr(img) : img;
  auto p = luma_src.plane(0);
  const int w = img.width(), h = img.height();
  double edge_sum = 0.0, inner_sum = 0.0;
  std::size_t edge_n = 0, inner_n = 0;
  auto tally = [&](bool on_grid, double d) {
    if (on_grid) {
      edge_sum += d;
      ++edge_n;
    } else {
      inner_sum += d;
      ++inner_n;
    }
  };
  // Difference between positions k-1 and k; a block boundary sits at k % 8 == 0.
  for (int y = 0; y < h; ++y)
    for (int x = 1; x < w; ++x)
      tally(x % 8 == 0, std::abs(p[static_cast<std::size_t>(y) * w + x] - p[static_cast<std::size_t>(y) * w + x - 1]));
  for (int y = 1; y < h; ++y)
    for (int x = 0; x < w; ++x)
      tally(y % 8 == 0, std::abs(p[static_cast<std::size_t>(y) * w + x] - p[static_cast<std::size_t>(y - 1) * w + x]));
  const double score = edge_sum / static_cast<double>(edge_n) - inner_sum / static_cast<double>(inner_n);
  return std::max(0.0, score);
}

}  // namespace cdlab
