#include "cdlab/dct_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cdlab/bytes.hpp"

namespace cdlab {
namespace dct {

namespace {

// ITU-T T.81 Annex K.1, row-major.
constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99};

constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,   //
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,  //
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,  //
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

// basis[u][x] = C(u)/2 * cos((2x+1) u pi / 16)
struct Basis {
  double v[8][8];
  Basis() {
    for (int u = 0; u < 8; ++u)
      for (int x = 0; x < 8; ++x) {
        const double cu = u == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
        v[u][x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
      }
  }
};

const Basis& basis() {
  static const Basis b;
  return b;
}

}  // namespace

QuantTable::QuantTable(TableKind kind, double multiplier) : multiplier_(multiplier) {
  if (!(multiplier > 0.0) || !std::isfinite(multiplier)) throw ParameterError("quantization multiplier must be > 0");
  const auto& b = base(kind);
  for (int i = 0; i < 64; ++i) {
    steps_[i] = std::clamp(b[i] * multiplier, 1.0, 32767.0);
  }
}

const std::array<int, 64>& QuantTable::base(TableKind kind) {
  return kind == TableKind::luminance ? kLumaBase : kChromaBase;
}

Block fdct8x8(const Block& samples) {
  const auto& c = basis().v;
  Block tmp{};
  // Rows: tmp(y, u) = sum_x c[u][x] s(y, x)
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += c[u][x] * (samples[y * 8 + x] - 128.0);
      tmp[y * 8 + u] = acc;
    }
  Block out{};
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += c[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = acc;
    }
  return out;
}

Block idct8x8(const Block& coeffs) {
  const auto& c = basis().v;
  Block tmp{};
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) acc += c[u][x] * coeffs[v * 8 + u];
      tmp[v * 8 + x] = acc;
    }
  Block out{};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int v = 0; v < 8; ++v) acc += c[v][y] * tmp[v * 8 + x];
      out[y * 8 + x] = acc + 128.0;
    }
  return out;
}

QBlock quantize_block(const Block& coeffs, const QuantTable& table) {
  QBlock q{};
  for (int i = 0; i < 64; ++i) q[i] = static_cast<int>(std::round(coeffs[i] / table.step(i)));
  return q;
}

Block dequantize_block(const QBlock& q, const QuantTable& table) {
  Block out{};
  for (int i = 0; i < 64; ++i) out[i] = q[i] * table.step(i);
  return out;
}

const std::array<int, 64>& zigzag_order() { return kZigzag; }

}  // namespace dct

namespace {

using dct::Block;
using dct::PlaneCoefficients;
using dct::QBlock;
using dct::QuantTable;
using dct::TableKind;

// ---------------------------------------------------------------------------
// Annex K.3 typical Huffman tables: code-length counts (1..16) and symbols.

struct HuffSpec {
  std::array<std::uint8_t, 16> counts;
  std::vector<std::uint8_t> symbols;
};

const HuffSpec kDcLuma{{0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
const HuffSpec kDcChroma{{0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};

const HuffSpec kAcLuma{
    {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d},
    {0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22, 0x71,
     0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72,
     0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37,
     0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
     0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
     0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3,
     0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
     0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
     0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};

const HuffSpec kAcChroma{
    {0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77},
    {0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71, 0x13, 0x22,
     0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1,
     0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36,
     0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
     0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
     0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a,
     0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba,
     0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
     0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};

// Canonical code assignment (T.81 Annex C) plus the F.2.2.3 decoding tables.
class HuffTable {
 public:
  explicit HuffTable(const HuffSpec& spec) : symbols_(spec.symbols) {
    std::uint32_t code = 0;
    std::size_t k = 0;
    for (int len = 1; len <= 16; ++len) {
      const int n = spec.counts[len - 1];
      valptr_[len] = static_cast<int>(k);
      mincode_[len] = static_cast<std::int32_t>(code);
      for (int i = 0; i < n; ++i, ++k, ++code) {
        code_[symbols_[k]] = code;
        length_[symbols_[k]] = static_cast<std::uint8_t>(len);
      }
      maxcode_[len] = n ? static_cast<std::int32_t>(code - 1) : -1;
      code <<= 1;
    }
  }

  void encode(BitWriter& bw, int symbol) const {
    if (length_[symbol] == 0) throw ParameterError("huffman: symbol has no code");
    bw.put(code_[symbol], length_[symbol]);
  }

  int decode(BitReader& br) const {
    std::int32_t code = 0;
    for (int len = 1; len <= 16; ++len) {
      code = (code << 1) | static_cast<std::int32_t>(br.bit());
      if (maxcode_[len] >= 0 && code <= maxcode_[len] && code >= mincode_[len])
        return symbols_[static_cast<std::size_t>(valptr_[len] + code - mincode_[len])];
    }
    throw DecodeError("invalid huffman code");
  }

 private:
  std::vector<std::uint8_t> symbols_;
  std::array<std::uint32_t, 256> code_{};
  std::array<std::uint8_t, 256> length_{};
  std::array<std::int32_t, 17> mincode_{};
  std::array<std::int32_t, 17> maxcode_{};
  std::array<int, 17> valptr_{};
};

struct HuffSet {
  HuffTable dc_luma{kDcLuma}, dc_chroma{kDcChroma}, ac_luma{kAcLuma}, ac_chroma{kAcChroma};
};

const HuffSet& huff() {
  static const HuffSet h;
  return h;
}

int category(int v) {
  int a = std::abs(v), n = 0;
  while (a) {
    ++n;
    a >>= 1;
  }
  return n;
}

void put_magnitude(BitWriter& bw, int v, int cat) {
  if (cat == 0) return;
  const std::uint32_t bits = v >= 0 ? static_cast<std::uint32_t>(v) : static_cast<std::uint32_t>(v + (1 << cat) - 1);
  bw.put(bits, cat);
}

int get_magnitude(BitReader& br, int cat) {
  if (cat == 0) return 0;
  const int bits = static_cast<int>(br.get(cat));
  return bits >= (1 << (cat - 1)) ? bits : bits - (1 << cat) + 1;
}

void encode_plane(BitWriter& bw, const PlaneCoefficients& plane, bool luma) {
  const auto& h = huff();
  const HuffTable& dc = luma ? h.dc_luma : h.dc_chroma;
  const HuffTable& ac = luma ? h.ac_luma : h.ac_chroma;
  int pred = 0;
  for (const QBlock& qb : plane.blocks) {
    const auto z = dct::zigzag(qb);
    const int diff = z[0] - pred;
    pred = z[0];
    const int dcat = category(diff);
    if (dcat > 11) throw ParameterError("dct: DC difference out of range");
    dc.encode(bw, dcat);
    put_magnitude(bw, diff, dcat);
    int run = 0;
    for (int k = 1; k < 64; ++k) {
      if (z[k] == 0) {
        ++run;
        continue;
      }
      while (run > 15) {
        ac.encode(bw, 0xF0);
        run -= 16;
      }
      const int acat = category(z[k]);
      if (acat > 10) throw ParameterError("dct: AC coefficient out of range");
      ac.encode(bw, (run << 4) | acat);
      put_magnitude(bw, z[k], acat);
      run = 0;
    }
    if (run > 0) ac.encode(bw, 0x00);
  }
}

PlaneCoefficients decode_plane(BitReader& br, int width, int height, bool luma) {
  const auto& h = huff();
  const HuffTable& dc = luma ? h.dc_luma : h.dc_chroma;
  const HuffTable& ac = luma ? h.ac_luma : h.ac_chroma;
  PlaneCoefficients plane{width, height, {}};
  const std::size_t nblocks = static_cast<std::size_t>(width / 8) * static_cast<std::size_t>(height / 8);
  plane.blocks.reserve(nblocks);
  int pred = 0;
  for (std::size_t b = 0; b < nblocks; ++b) {
    std::array<int, 64> z{};
    const int dcat = dc.decode(br);
    if (dcat > 11) throw DecodeError("DC category out of range");
    pred += get_magnitude(br, dcat);
    z[0] = pred;
    int k = 1;
    while (k < 64) {
      const int sym = ac.decode(br);
      if (sym == 0x00) break;
      if (sym == 0xF0) {
        k += 16;
        if (k > 64) throw DecodeError("zero run past end of block");
        continue;
      }
      k += sym >> 4;
      if (k > 63) throw DecodeError("AC index past end of block");
      z[k++] = get_magnitude(br, sym & 15);
    }
    plane.blocks.push_back(dct::inverse_zigzag(z));
  }
  return plane;
}

// Planes that enter the block transform: YCbCr for colour input, chroma
// optionally 2x2-subsampled, every plane padded to a multiple of 8.
std::vector<Image> codec_planes(const Image& img, bool subsample) {
  std::vector<Image> planes;
  if (img.channels() == 1) {
    planes.push_back(pad_to_multiple(img, 8));
    return planes;
  }
  const Image ycc = pad_to_multiple(rgb_to_ycbcr(img), subsample ? 16 : 8);
  for (int c = 0; c < 3; ++c) {
    Image p = extract_channel(ycc, c);
    planes.push_back(subsample && c > 0 ? downsample2(p) : std::move(p));
  }
  return planes;
}

PlaneCoefficients quantize_plane(const Image& plane, const QuantTable& table) {
  PlaneCoefficients out{plane.width(), plane.height(), {}};
  auto src = plane.plane(0);
  for (int by = 0; by < plane.height(); by += 8)
    for (int bx = 0; bx < plane.width(); bx += 8) {
      Block b{};
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          b[y * 8 + x] = src[static_cast<std::size_t>(by + y) * plane.width() + bx + x];
      out.blocks.push_back(dct::quantize_block(dct::fdct8x8(b), table));
    }
  return out;
}

Image reconstruct_plane(const PlaneCoefficients& pc, const QuantTable& table) {
  Image out(pc.width, pc.height, 1);
  auto dst = out.plane_mut(0);
  std::size_t bi = 0;
  for (int by = 0; by < pc.height; by += 8)
    for (int bx = 0; bx < pc.width; bx += 8) {
      const Block s = dct::idct8x8(dct::dequantize_block(pc.blocks[bi++], table));
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          dst[static_cast<std::size_t>(by + y) * pc.width + bx + x] = s[y * 8 + x];
    }
  out.clamp();
  return out;
}

TableKind kind_for(int c) { return c == 0 ? TableKind::luminance : TableKind::chrominance; }

Image reconstruct_image(const std::vector<PlaneCoefficients>& planes, int width, int height, int channels,
                        bool subsample, double multiplier) {
  std::vector<Image> rec;
  for (std::size_t c = 0; c < planes.size(); ++c)
    rec.push_back(reconstruct_plane(planes[c], QuantTable(kind_for(static_cast<int>(c)), multiplier)));
  if (channels == 1) return crop(rec[0], width, height);
  if (subsample)
    for (int c = 1; c < 3; ++c) rec[c] = upsample2(rec[c], rec[0].width(), rec[0].height());
  return crop(ycbcr_to_rgb(merge_channels(rec)), width, height);
}

void check_input(const Image& img, double multiplier) {
  if (img.empty()) throw ShapeError("dct codec: empty image");
  if (!(multiplier > 0.0) || !std::isfinite(multiplier)) throw ParameterError("dct codec: multiplier must be > 0");
}

}  // namespace

std::vector<PlaneCoefficients> dct_quantized_planes(const Image& img, double multiplier, bool subsample) {
  check_input(img, multiplier);
  subsample = subsample && img.channels() == 3;
  std::vector<PlaneCoefficients> out;
  const auto planes = codec_planes(img, subsample);
  for (std::size_t c = 0; c < planes.size(); ++c)
    out.push_back(quantize_plane(planes[c], QuantTable(kind_for(static_cast<int>(c)), multiplier)));
  return out;
}

DctStream encode_dct(const Image& img, double multiplier, bool subsample) {
  const auto planes = dct_quantized_planes(img, multiplier, subsample);
  DctStream s;
  s.width = static_cast<std::uint32_t>(img.width());
  s.height = static_cast<std::uint32_t>(img.height());
  s.channels = static_cast<std::uint8_t>(img.channels());
  s.subsample = subsample && img.channels() == 3;
  s.multiplier = multiplier;
  BitWriter bw;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    encode_plane(bw, planes[c], c == 0);
    // Each plane starts byte aligned; fill with 1s as T.81 does.
    while (bw.bit_count() % 8) bw.bit(1);
  }
  s.payload = bw.finish(1);
  return s;
}

std::vector<PlaneCoefficients> decode_dct_coefficients(const DctStream& s) {
  if (s.channels != 1 && s.channels != 3) throw FormatError("DCX1: channels must be 1 or 3");
  if (s.width == 0 || s.height == 0 || s.width > 65536 || s.height > 65536)
    throw FormatError("DCX1: bad dimensions");
  if (!(s.multiplier > 0.0) || !std::isfinite(s.multiplier)) throw FormatError("DCX1: bad multiplier");
  const bool sub = s.subsample && s.channels == 3;
  const int align = sub ? 16 : 8;
  const int pw = static_cast<int>((s.width + align - 1) / align * align);
  const int ph = static_cast<int>((s.height + align - 1) / align * align);
  // Every block costs at least 4 bits, so reject headers the payload cannot back.
  std::uint64_t blocks = static_cast<std::uint64_t>(pw / 8) * static_cast<std::uint64_t>(ph / 8);
  if (s.channels == 3) blocks += 2 * (sub ? blocks / 4 : blocks);
  if (blocks * 4 > static_cast<std::uint64_t>(s.payload.size()) * 8)
    throw DecodeError("DCX1: payload too short for declared dimensions (" + std::to_string(s.payload.size()) +
                      " bytes)");
  BitReader br(s.payload.data(), s.payload.size());
  std::vector<PlaneCoefficients> planes;
  try {
    for (int c = 0; c < s.channels; ++c) {
      const int w = (c > 0 && sub) ? pw / 2 : pw;
      const int h = (c > 0 && sub) ? ph / 2 : ph;
      planes.push_back(decode_plane(br, w, h, c == 0));
      while (br.bit_pos() % 8) br.bit();
    }
  } catch (const BitLimitReached&) {
    throw DecodeError("DCX1: payload truncated at byte offset " + std::to_string(br.byte_pos()));
  } catch (const DecodeError& e) {
    throw DecodeError(std::string("DCX1: ") + e.what() + " at byte offset " + std::to_string(br.byte_pos()));
  }
  return planes;
}

Image decode_dct(const DctStream& s) {
  const auto planes = decode_dct_coefficients(s);
  return reconstruct_image(planes, static_cast<int>(s.width), static_cast<int>(s.height), s.channels,
                           s.subsample && s.channels == 3, s.multiplier);
}

Image dct_quantize_only(const Image& img, double multiplier, bool subsample) {
  const auto planes = dct_quantized_planes(img, multiplier, subsample);
  return reconstruct_image(planes, img.width(), img.height(), img.channels(), subsample && img.channels() == 3,
                           multiplier);
}

std::vector<std::uint8_t> DctStream::serialize() const {
  ByteWriter w;
  w.raw("DCX1", 4);
  w.u32(width);
  w.u32(height);
  w.u8(channels);
  w.u8(subsample ? 1 : 0);
  w.f64(multiplier);
  w.u64(payload.size());
  w.bytes(payload);
  return w.take();
}

DctStream DctStream::parse(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "DCX1");
  r.expect_magic("DCX1");
  DctStream s;
  s.width = r.u32();
  s.height = r.u32();
  s.channels = r.u8();
  const std::uint8_t sub = r.u8();
  if (sub > 1) throw FormatError("DCX1: bad subsample flag");
  s.subsample = sub == 1;
  s.multiplier = r.f64();
  const std::uint64_t n = r.u64();
  s.payload = r.take(n);
  if (r.remaining() != 0) throw FormatError("DCX1: trailing bytes after payload");
  return s;
}

}  // namespace cdlab
