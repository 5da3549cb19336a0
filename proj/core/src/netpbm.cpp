#include "cdlab/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace cdlab {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw FormatError("netpbm: expected integer in header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000) throw FormatError("netpbm: header value too large");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("netpbm: missing raster separator");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_netpbm(const Image& img) {
  if (img.empty()) throw ShapeError("netpbm: empty image");
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.sample_count());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.push_back(static_cast<unsigned char>(std::clamp(std::lround(img.at(c, x, y)), 0L, 255L)));
  return out;
}

Image decode_netpbm(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw FormatError("netpbm: expected P5 or P6 magic");
  const int channels = bytes[1] == '5' ? 1 : 3;
  HeaderParser p(bytes);
  p.advance(2);
  const int w = p.read_uint();
  const int h = p.read_uint();
  const int maxval = p.read_uint();
  if (w <= 0 || h <= 0) throw FormatError("netpbm: zero dimension");
  if (maxval != 255) throw FormatError("netpbm: only maxval 255 is supported");
  p.single_space();
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (bytes.size() - p.pos() < need) throw FormatError("netpbm: truncated raster");
  Image img(w, h, channels);
  std::size_t i = p.pos();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) img.set(c, x, y, bytes[i++]);
  return img;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_netpbm(const std::filesystem::path& path, const Image& img) { write_file(path, encode_netpbm(img)); }

Image read_netpbm(const std::filesystem::path& path) { return decode_netpbm(read_file(path)); }

}  // namespace cdlab
