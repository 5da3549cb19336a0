#include "cdlab/embedded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "cdlab/bytes.hpp"
#include "cdlab/dct_codec.hpp"

namespace cdlab {

using wavelet::Filter;
using wavelet::SubbandPyramid;

namespace {

constexpr int kMaxRunParam = 12;
constexpr int kMaxBitplanes = 62;

// Geometry shared by encoder and decoder: band sizes, steps and the fixed
// order in which bands are visited within a bitplane.
struct Layout {
  int channels = 1;
  int width = 0, height = 0;
  int levels = 1;
  Filter filter = Filter::irreversible97;
  std::vector<std::size_t> band_sizes;
  std::vector<double> steps;
  std::vector<std::size_t> band_order;
  SubbandPyramid shape;  // zero coefficients, used as a template
  bool exact_integer = false;  // 5/3 with unit steps: no midpoint offset

  std::size_t bands() const { return band_sizes.size(); }
};

Layout make_layout(int channels, int width, int height, int levels, Filter filter, double base_step) {
  Layout lay{channels, width, height, levels, filter, {}, {}, {}, {}, false};
  lay.shape = wavelet::decompose(std::vector<double>(static_cast<std::size_t>(width) * height), width, height, levels,
                                 filter);
  const SubbandPyramid& shape = lay.shape;
  for (const auto& b : shape.bands) {
    lay.band_sizes.push_back(b.coeffs.size());
    lay.steps.push_back(base_step / std::sqrt(b.weight));
  }
  lay.band_order.resize(lay.bands());
  std::iota(lay.band_order.begin(), lay.band_order.end(), 0);
  std::stable_sort(lay.band_order.begin(), lay.band_order.end(),
                   [&](std::size_t a, std::size_t b) { return shape.bands[a].weight > shape.bands[b].weight; });
  lay.exact_integer = filter == Filter::reversible53 && base_step == 1.0;
  return lay;
}

// What a decoder knows about every coefficient.
struct CoefState {
  std::vector<std::uint64_t> mag;
  std::vector<std::int8_t> sign;
  std::vector<std::uint8_t> plane_done;  // bits >= plane_done are known
};

using ChannelState = std::vector<CoefState>;  // per band

std::vector<ChannelState> initial_state(const Layout& lay, const std::vector<std::vector<int>>& nbits) {
  std::vector<ChannelState> st(static_cast<std::size_t>(lay.channels));
  for (int c = 0; c < lay.channels; ++c)
    for (std::size_t b = 0; b < lay.bands(); ++b) {
      const std::size_t n = lay.band_sizes[b];
      st[c].push_back({std::vector<std::uint64_t>(n, 0), std::vector<std::int8_t>(n, 1),
                       std::vector<std::uint8_t>(n, static_cast<std::uint8_t>(nbits[c][b]))});
    }
  return st;
}

inline double dequantize(std::uint64_t mag, int sign, int plane_done, double step, bool exact) {
  if (mag == 0) return 0.0;
  if (exact && plane_done == 0) return sign * static_cast<double>(mag) * step;
  const double centre = static_cast<double>(mag) + 0.5 * std::ldexp(1.0, plane_done);
  return sign * centre * step;
}

// Planes fed to the transform: YCbCr for colour, padded, level-shifted.
std::vector<std::vector<double>> prepare_planes(const Image& img, int unit) {
  const Image padded = pad_to_multiple(img.channels() == 3 ? rgb_to_ycbcr(img) : img, unit);
  std::vector<std::vector<double>> planes;
  for (int c = 0; c < padded.channels(); ++c) {
    std::vector<double> p(padded.plane(c).begin(), padded.plane(c).end());
    for (double& v : p) v -= 128.0;
    planes.push_back(std::move(p));
  }
  return planes;
}

Image finish_image(const Layout& lay, const std::vector<SubbandPyramid>& pyrs, int width, int height) {
  Image out(lay.width, lay.height, lay.channels);
  for (int c = 0; c < lay.channels; ++c) {
    const auto plane = wavelet::reconstruct(pyrs[c]);
    auto dst = out.plane_mut(c);
    for (std::size_t i = 0; i < plane.size(); ++i) dst[i] = plane[i] + 128.0;
  }
  out.clamp();
  Image cropped = crop(out, width, height);
  return lay.channels == 3 ? ycbcr_to_rgb(cropped) : cropped;
}

std::vector<SubbandPyramid> state_to_pyramids(const Layout& lay, const std::vector<ChannelState>& st) {
  std::vector<SubbandPyramid> pyrs;
  for (int c = 0; c < lay.channels; ++c) {
    SubbandPyramid p = lay.shape;
    for (std::size_t b = 0; b < lay.bands(); ++b) {
      const CoefState& cs = st[c][b];
      for (std::size_t i = 0; i < cs.mag.size(); ++i)
        p.bands[b].coeffs[i] = dequantize(cs.mag[i], cs.sign[i], cs.plane_done[i], lay.steps[b], lay.exact_integer);
    }
    pyrs.push_back(std::move(p));
  }
  return pyrs;
}

// Visit order: bitplanes from the top down; within a plane, bands by
// decreasing synthesis weight, channels, then raster order. A visit to a
// significant coefficient is a refinement (one raw bit); a visit to an
// insignificant one is a significance decision coded by the run coder.
class Cursor {
 public:
  Cursor(const Layout& lay, const std::vector<std::vector<int>>& nbits) : lay_(lay), nbits_(nbits) {
    for (const auto& ch : nbits)
      for (int n : ch) plane_ = std::max(plane_, n);
    --plane_;
    settle();
  }
  bool done() const { return plane_ < 0; }
  int plane() const { return plane_; }
  int channel() const { return channel_; }
  std::size_t band() const { return lay_.band_order[order_]; }
  std::size_t index() const { return index_; }
  void advance() {
    ++index_;
    settle();
  }

 private:
  // Moves forward to the next coded position (skipping bands whose
  // magnitude bits are all above the current plane).
  void settle() {
    while (plane_ >= 0) {
      if (order_ < lay_.bands()) {
        const std::size_t b = lay_.band_order[order_];
        if (plane_ < nbits_[channel_][b] && index_ < lay_.band_sizes[b]) return;
        index_ = 0;
        if (++channel_ < lay_.channels) continue;
        channel_ = 0;
        ++order_;
        continue;
      }
      order_ = 0;
      channel_ = 0;
      index_ = 0;
      --plane_;
    }
  }

  const Layout& lay_;
  const std::vector<std::vector<int>>& nbits_;
  int plane_ = 0;
  std::size_t order_ = 0;
  int channel_ = 0;
  std::size_t index_ = 0;
};

// Run-coder state shared by both ends. A '0' token covers 2^k zero
// decisions; a '1' token carries a k-bit count r of zeros followed by a
// one, plus that one's sign bit.
struct RunState {
  std::uint64_t pending_zeros = 0;
  bool pending_one = false;
  std::int8_t pending_sign = 1;
  int k = 0;
};

// Decoder that consumes visits in order and stops, with no partial effects,
// at the first visit whose bits lie beyond the readable prefix.
class VisitDecoder {
 public:
  VisitDecoder(const Layout& lay, std::vector<std::vector<int>> nbits, const std::uint8_t* data, std::size_t nbytes,
               std::uint64_t start_bit)
      : lay_(lay), nbits_(std::move(nbits)), br_(data, nbytes), state_(initial_state(lay, nbits_)),
        cursor_(lay, nbits_) {
    for (std::uint64_t i = 0; i < start_bit; ++i) br_.bit();
  }

  const std::vector<ChannelState>& state() const { return state_; }
  std::uint64_t bit_pos() const { return br_.bit_pos(); }
  bool finished() const { return cursor_.done(); }
  void set_limit(std::uint64_t nbytes) { br_.set_limit(nbytes); }

  // Decodes visits until the data runs out or the stream is exhausted.
  void run() {
    while (!cursor_.done() && step()) {
    }
  }

  bool step() {
    CoefState& cs = state_[cursor_.channel()][cursor_.band()];
    const std::size_t i = cursor_.index();
    const int p = cursor_.plane();
    const std::uint64_t bitv = std::uint64_t{1} << p;
    const BitReader saved = br_;
    try {
      if (cs.mag[i] != 0) {
        if (br_.bit()) cs.mag[i] |= bitv;
      } else {
        RunState rs = run_;
        bool one = false;
        std::int8_t sign = 1;
        if (rs.pending_zeros > 0) {
          --rs.pending_zeros;
        } else if (rs.pending_one) {
          one = true;
          sign = rs.pending_sign;
          rs.pending_one = false;
        } else if (br_.bit() == 0) {
          rs.pending_zeros = (std::uint64_t{1} << rs.k) - 1;
          rs.k = std::min(rs.k + 1, kMaxRunParam);
        } else {
          const std::uint64_t r = br_.get(rs.k);
          const std::int8_t s = br_.bit() ? -1 : 1;
          if (r == 0) {
            one = true;
            sign = s;
          } else {
            rs.pending_zeros = r - 1;
            rs.pending_one = true;
            rs.pending_sign = s;
          }
          rs.k = std::max(rs.k - 1, 0);
        }
        run_ = rs;
        if (one) {
          cs.mag[i] = bitv;
          cs.sign[i] = sign;
        }
      }
    } catch (const BitLimitReached&) {
      br_ = saved;
      return false;
    }
    cs.plane_done[i] = static_cast<std::uint8_t>(p);
    cursor_.advance();
    return true;
  }

 private:
  const Layout& lay_;
  std::vector<std::vector<int>> nbits_;
  BitReader br_;
  std::vector<ChannelState> state_;
  Cursor cursor_;
  RunState run_;
};

double psnr_db(double m) { return m <= 0.0 ? 200.0 : 10.0 * std::log10(255.0 * 255.0 / m); }

Layout layout_of(const EmbeddedStream& s) {
  return make_layout(s.channels, static_cast<int>(s.padded_width), static_cast<int>(s.padded_height), s.levels,
                     s.filter, s.base_step);
}

std::vector<std::vector<int>> read_nbits(const Layout& lay, const std::vector<std::uint8_t>& payload,
                                         std::uint64_t limit) {
  const std::size_t need = static_cast<std::size_t>(lay.channels) * lay.bands();
  if (limit < need || payload.size() < need) throw DecodeError("WVX1: payload shorter than its bitplane header");
  std::vector<std::vector<int>> nbits(static_cast<std::size_t>(lay.channels));
  std::size_t k = 0;
  for (int c = 0; c < lay.channels; ++c)
    for (std::size_t b = 0; b < lay.bands(); ++b) {
      const int n = payload[k++];
      if (n > kMaxBitplanes)
        throw DecodeError("WVX1: bitplane count out of range at byte offset " + std::to_string(k - 1));
      nbits[c].push_back(n);
    }
  return nbits;
}

void check_options(const Image& img, const EmbeddedOptions& o) {
  if (img.empty()) throw ShapeError("wavelet codec: empty image");
  if (!(o.base_step > 0.0) || !std::isfinite(o.base_step)) throw ParameterError("wavelet codec: base step must be > 0");
}

int resolve_levels(const Image& img, int levels) {
  const int maxl = wavelet::max_levels(img.width(), img.height());
  if (maxl < 1) throw ShapeError("wavelet codec: image must be at least 2x2");
  if (levels == 0) return std::min(5, maxl);
  if (levels < 1 || levels > maxl) throw ParameterError("wavelet codec: levels out of range");
  return levels;
}

}  // namespace

int default_levels(int width, int height) { return std::min(5, wavelet::max_levels(width, height)); }

std::vector<double> EmbeddedStream::band_steps() const { return layout_of(*this).steps; }

EmbeddedStream encode_embedded(const Image& img, const EmbeddedOptions& opt) {
  check_options(img, opt);
  const int levels = resolve_levels(img, opt.levels);
  const int unit = 1 << levels;
  const int pw = (img.width() + unit - 1) / unit * unit;
  const int ph = (img.height() + unit - 1) / unit * unit;
  const Layout lay = make_layout(img.channels(), pw, ph, levels, opt.filter, opt.base_step);

  // Dead-zone quantization.
  const auto planes = prepare_planes(img, unit);
  std::vector<SubbandPyramid> pyrs;
  std::vector<std::vector<std::vector<std::uint64_t>>> q(static_cast<std::size_t>(lay.channels));
  std::vector<std::vector<int>> nbits(static_cast<std::size_t>(lay.channels));
  for (int c = 0; c < lay.channels; ++c) {
    pyrs.push_back(wavelet::decompose(planes[c], pw, ph, levels, opt.filter));
    for (std::size_t b = 0; b < lay.bands(); ++b) {
      std::vector<std::uint64_t> qb;
      std::uint64_t maxq = 0;
      for (double v : pyrs[c].bands[b].coeffs) {
        const double m = std::floor(std::abs(v) / lay.steps[b]);
        if (m >= std::ldexp(1.0, kMaxBitplanes)) throw ParameterError("wavelet codec: base step too small");
        qb.push_back(static_cast<std::uint64_t>(m));
        maxq = std::max(maxq, qb.back());
      }
      nbits[c].push_back(maxq == 0 ? 0 : static_cast<int>(std::bit_width(maxq)));
      q[c].push_back(std::move(qb));
    }
  }

  // Significance decisions in visit order, needed for run-length lookahead.
  // 0 = stays insignificant, +-1 = becomes significant with that sign.
  std::vector<std::int8_t> decisions;
  {
    auto st = initial_state(lay, nbits);
    for (Cursor cur(lay, nbits); !cur.done(); cur.advance()) {
      CoefState& cs = st[cur.channel()][cur.band()];
      const std::size_t i = cur.index();
      if (cs.mag[i] != 0) continue;
      const std::uint64_t bitv = std::uint64_t{1} << cur.plane();
      if (q[cur.channel()][cur.band()][i] & bitv) {
        cs.mag[i] = bitv;
        decisions.push_back(pyrs[cur.channel()].bands[cur.band()].coeffs[i] < 0 ? -1 : 1);
      } else {
        decisions.push_back(0);
      }
    }
  }
  // next_one[j]: index of the first nonzero decision at or after j.
  std::vector<std::size_t> next_one(decisions.size() + 1, decisions.size());
  for (std::size_t j = decisions.size(); j-- > 0;) next_one[j] = decisions[j] != 0 ? j : next_one[j + 1];

  // Code every visit, tracking the weighted coefficient-domain error as a
  // cheap proxy that only picks which byte offsets get measured.
  BitWriter bw;
  for (const auto& ch : nbits)
    for (int n : ch) bw.put(static_cast<std::uint32_t>(n), 8);
  const std::uint64_t header_bits = bw.bit_count();
  const double norm = static_cast<double>(pw) * ph * lay.channels;
  double est = 0.0;
  for (int c = 0; c < lay.channels; ++c)
    for (std::size_t b = 0; b < lay.bands(); ++b)
      for (double v : pyrs[c].bands[b].coeffs) est += pyrs[c].bands[b].weight * v * v;

  struct Candidate {
    std::uint64_t offset;
    double est_mse;
  };
  std::vector<Candidate> candidates;
  auto st = initial_state(lay, nbits);
  RunState rs;
  std::size_t j = 0;  // decision index
  std::uint64_t last_end = header_bits;
  bool any = false;
  double last_est = est;
  for (Cursor cur(lay, nbits); !cur.done(); cur.advance()) {
    const int c = cur.channel();
    const std::size_t b = cur.band(), i = cur.index();
    const int p = cur.plane();
    CoefState& cs = st[c][b];
    const double coeff = pyrs[c].bands[b].coeffs[i];
    const double w = pyrs[c].bands[b].weight;
    const std::uint64_t bitv = std::uint64_t{1} << p;
    auto err = [&](int pd) {
      const double d = coeff - dequantize(cs.mag[i], cs.sign[i], pd, lay.steps[b], lay.exact_integer);
      return w * d * d;
    };
    const double before = err(cs.plane_done[i]);
    if (cs.mag[i] != 0) {
      const bool bit = (q[c][b][i] & bitv) != 0;
      bw.bit(bit ? 1 : 0);
      if (bit) cs.mag[i] |= bitv;
    } else {
      bool one = false;
      std::int8_t sign = 1;
      if (rs.pending_zeros > 0) {
        --rs.pending_zeros;
      } else if (rs.pending_one) {
        one = true;
        sign = rs.pending_sign;
        rs.pending_one = false;
      } else {
        const std::uint64_t span = std::uint64_t{1} << rs.k;
        const std::size_t zeros = next_one[j] - j;
        if (zeros >= span) {
          bw.bit(0);
          rs.pending_zeros = span - 1;
          rs.k = std::min(rs.k + 1, kMaxRunParam);
        } else {
          const std::int8_t s = next_one[j] < decisions.size() ? decisions[next_one[j]] : 1;
          bw.bit(1);
          bw.put(static_cast<std::uint32_t>(zeros), rs.k);
          bw.bit(s < 0 ? 1 : 0);
          if (zeros == 0) {
            one = true;
            sign = s;
          } else {
            rs.pending_zeros = zeros - 1;
            rs.pending_one = true;
            rs.pending_sign = s;
          }
          rs.k = std::max(rs.k - 1, 0);
        }
      }
      ++j;
      if (one) {
        cs.mag[i] = bitv;
        cs.sign[i] = sign;
      }
    }
    cs.plane_done[i] = static_cast<std::uint8_t>(p);
    est += err(p) - before;
    const std::uint64_t end = bw.bit_count();
    // A prefix of B bytes decodes every visit whose bits end at or before 8B.
    if (any && (end + 7) / 8 > (last_end + 7) / 8)
      candidates.push_back({(last_end + 7) / 8, std::max(last_est, 0.0) / norm});
    any = true;
    last_end = end;
    last_est = est;
  }
  if (any) candidates.push_back({(last_end + 7) / 8, std::max(last_est, 0.0) / norm});

  EmbeddedStream s;
  s.width = static_cast<std::uint32_t>(img.width());
  s.height = static_cast<std::uint32_t>(img.height());
  s.padded_width = static_cast<std::uint32_t>(pw);
  s.padded_height = static_cast<std::uint32_t>(ph);
  s.channels = static_cast<std::uint8_t>(img.channels());
  s.filter = opt.filter;
  s.levels = static_cast<std::uint8_t>(levels);
  s.base_step = opt.base_step;
  s.payload = bw.finish(0);
  if (candidates.empty()) candidates.push_back({s.payload.size(), 0.0});

  std::vector<std::size_t> chosen;
  for (double spacing = opt.point_spacing_db;; spacing *= 1.5) {
    chosen.clear();
    double last = -1e300;
    for (std::size_t e = 0; e < candidates.size(); ++e) {
      const double db = psnr_db(candidates[e].est_mse);
      // Points far above any useful target are spaced more coarsely.
      const double need = db > 55.0 ? std::max(spacing, 2.0) : spacing;
      if (chosen.empty() || db >= last + need) {
        chosen.push_back(e);
        last = db;
      }
    }
    if (chosen.back() != candidates.size() - 1) chosen.push_back(candidates.size() - 1);
    if (chosen.size() <= std::max<std::size_t>(opt.max_points, 2)) break;
  }

  // Measure every chosen point by decoding its prefix.
  std::vector<double> mses(chosen.size(), 0.0);
  {
    VisitDecoder dec(lay, nbits, s.payload.data(), s.payload.size(), header_bits);
    const unsigned workers =
        opt.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : std::max(1u, opt.workers);
    std::size_t ci = 0;
    while (ci < chosen.size()) {
      std::vector<std::pair<std::size_t, std::vector<SubbandPyramid>>> batch;
      while (ci < chosen.size() && batch.size() < workers) {
        dec.set_limit(candidates[chosen[ci]].offset);
        dec.run();
        batch.emplace_back(ci, state_to_pyramids(lay, dec.state()));
        ++ci;
      }
      auto measure = [&](std::size_t k) {
        mses[batch[k].first] = mse(img, finish_image(lay, batch[k].second, img.width(), img.height()));
      };
      if (batch.size() == 1) {
        measure(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < batch.size(); ++k) pool.emplace_back(measure, k);
        for (auto& t : pool) t.join();
      }
    }
  }
  // Keep the final point; walk backwards dropping points that would break
  // the non-increasing MSE order.
  std::vector<TruncationPoint> rev;
  for (std::size_t k = chosen.size(); k-- > 0;) {
    const TruncationPoint tp{candidates[chosen[k]].offset, mses[k]};
    if (rev.empty() || tp.mse >= rev.back().mse) rev.push_back(tp);
  }
  s.truncation.assign(rev.rbegin(), rev.rend());
  return s;
}

Image decode_embedded(const EmbeddedStream& s, std::uint64_t at_offset) {
  const auto it = std::find_if(s.truncation.begin(), s.truncation.end(),
                               [&](const TruncationPoint& t) { return t.offset == at_offset; });
  if (it == s.truncation.end()) throw ParameterError("decode_embedded: offset is not a recorded truncation point");
  if (at_offset > s.payload.size()) throw DecodeError("WVX1: truncation offset beyond payload");
  const Layout lay = layout_of(s);
  const auto nbits = read_nbits(lay, s.payload, at_offset);
  const std::uint64_t header_bits = static_cast<std::uint64_t>(lay.channels) * lay.bands() * 8;
  VisitDecoder dec(lay, nbits, s.payload.data(), static_cast<std::size_t>(at_offset), header_bits);
  dec.run();
  return finish_image(lay, state_to_pyramids(lay, dec.state()), static_cast<int>(s.width),
                      static_cast<int>(s.height));
}

Image decode_embedded(const EmbeddedStream& s) {
  if (s.truncation.empty()) throw DecodeError("WVX1: empty truncation table");
  return decode_embedded(s, s.truncation.back().offset);
}

Image wavelet_quantize_only(const Image& img, int levels, Filter filter, double base_step) {
  EmbeddedOptions o;
  o.levels = levels;
  o.filter = filter;
  o.base_step = base_step;
  check_options(img, o);
  levels = resolve_levels(img, levels);
  const int unit = 1 << levels;
  const int pw = (img.width() + unit - 1) / unit * unit;
  const int ph = (img.height() + unit - 1) / unit * unit;
  const Layout lay = make_layout(img.channels(), pw, ph, levels, filter, base_step);
  const auto planes = prepare_planes(img, unit);
  std::vector<SubbandPyramid> pyrs;
  for (int c = 0; c < lay.channels; ++c) {
    SubbandPyramid p = wavelet::decompose(planes[c], pw, ph, levels, filter);
    for (std::size_t b = 0; b < lay.bands(); ++b)
      for (double& v : p.bands[b].coeffs) {
        const double m = std::floor(std::abs(v) / lay.steps[b]);
        v = dequantize(static_cast<std::uint64_t>(m), v < 0 ? -1 : 1, 0, lay.steps[b], lay.exact_integer);
      }
    pyrs.push_back(std::move(p));
  }
  return finish_image(lay, pyrs, img.width(), img.height());
}

std::size_t EmbeddedStream::byte_size() const { return 43 + 16 * truncation.size() + payload.size(); }

EmbeddedStream EmbeddedStream::truncated(std::uint64_t offset) const {
  const auto it = std::find_if(truncation.begin(), truncation.end(),
                               [&](const TruncationPoint& t) { return t.offset == offset; });
  if (it == truncation.end()) throw ParameterError("truncated: offset is not a recorded truncation point");
  EmbeddedStream out = *this;
  out.truncation = {*it};
  out.payload.resize(static_cast<std::size_t>(offset));
  return out;
}

std::vector<std::uint8_t> EmbeddedStream::serialize() const {
  ByteWriter w;
  w.raw("WVX1", 4);
  w.u32(width);
  w.u32(height);
  w.u32(padded_width);
  w.u32(padded_height);
  w.u8(channels);
  w.u8(static_cast<std::uint8_t>(filter));
  w.u8(levels);
  w.f64(base_step);
  w.u32(static_cast<std::uint32_t>(truncation.size()));
  for (const auto& t : truncation) {
    w.u64(t.offset);
    w.f64(t.mse);
  }
  w.u64(payload.size());
  w.bytes(payload);
  return w.take();
}

EmbeddedStream EmbeddedStream::parse(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "WVX1");
  r.expect_magic("WVX1");
  EmbeddedStream s;
  s.width = r.u32();
  s.height = r.u32();
  s.padded_width = r.u32();
  s.padded_height = r.u32();
  s.channels = r.u8();
  const std::uint8_t f = r.u8();
  s.levels = r.u8();
  s.base_step = r.f64();
  if (s.channels != 1 && s.channels != 3) throw FormatError("WVX1: channels must be 1 or 3");
  if (f > 1) throw FormatError("WVX1: unknown filter id");
  s.filter = static_cast<Filter>(f);
  if (!(s.base_step > 0.0) || !std::isfinite(s.base_step)) throw FormatError("WVX1: bad base step");
  if (s.width == 0 || s.height == 0 || s.width > 65536 || s.height > 65536) throw FormatError("WVX1: bad dimensions");
  if (s.levels < 1 || s.levels > wavelet::max_levels(static_cast<int>(s.width), static_cast<int>(s.height)))
    throw FormatError("WVX1: bad level count");
  const std::uint32_t unit = 1u << s.levels;
  if (s.padded_width % unit || s.padded_height % unit || s.padded_width < s.width || s.padded_height < s.height ||
      s.padded_width - s.width >= unit || s.padded_height - s.height >= unit)
    throw FormatError("WVX1: inconsistent padded dimensions");
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * 16 > r.remaining()) throw FormatError("WVX1: truncation table truncated");
  for (std::uint32_t i = 0; i < count; ++i) {
    TruncationPoint t;
    t.offset = r.u64();
    t.mse = r.f64();
    if (!std::isfinite(t.mse) || t.mse < 0.0) throw FormatError("WVX1: bad truncation MSE");
    if (!s.truncation.empty() && (t.offset <= s.truncation.back().offset || t.mse > s.truncation.back().mse))
      throw FormatError("WVX1: truncation table out of order");
    s.truncation.push_back(t);
  }
  const std::uint64_t n = r.u64();
  s.payload = r.take(n);
  if (r.remaining() != 0) throw FormatError("WVX1: trailing bytes after payload");
  if (!s.truncation.empty() && s.truncation.back().offset > s.payload.size())
    throw FormatError("WVX1: truncation offset beyond payload");
  return s;
}

}  // namespace cdlab
