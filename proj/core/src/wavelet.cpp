#include "cdlab/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cdlab::wavelet {

namespace {

void check_length(std::size_t n) {
  if (n < 2) throw ShapeError("wavelet: signal length must be >= 2");
}

// Symmetric access into the detail/approx halves of a split signal.
inline double dext(std::span<const double> d, long i) {
  const long nd = static_cast<long>(d.size());
  if (i < 0) return d[static_cast<std::size_t>(-1 - i)];
  if (i >= nd) return d[static_cast<std::size_t>(2 * nd - 1 - i)];
  return d[static_cast<std::size_t>(i)];
}

inline double sext(std::span<const double> s, long j, long n) {
  if (j >= static_cast<long>(s.size())) return s[static_cast<std::size_t>(n - 1 - j)];
  return s[static_cast<std::size_t>(j)];
}

inline double xext(std::span<const double> x, long k) {
  const long n = static_cast<long>(x.size());
  if (k >= n) return x[static_cast<std::size_t>(2 * (n - 1) - k)];
  return x[static_cast<std::size_t>(k)];
}

}  // namespace

void forward53(std::span<const double> x, std::span<double> s, std::span<double> d) {
  check_length(x.size());
  const long n = static_cast<long>(x.size());
  const long nd = n / 2, ns = (n + 1) / 2;
  for (long i = 0; i < nd; ++i) d[i] = x[2 * i + 1] - std::floor((x[2 * i] + xext(x, 2 * i + 2)) / 2.0);
  std::span<const double> dc(d.data(), static_cast<std::size_t>(nd));
  for (long i = 0; i < ns; ++i) s[i] = x[2 * i] + std::floor((dext(dc, i - 1) + dext(dc, i) + 2.0) / 4.0);
}

void inverse53(std::span<const double> s, std::span<const double> d, std::span<double> x) {
  const long n = static_cast<long>(x.size());
  check_length(x.size());
  const long nd = n / 2, ns = (n + 1) / 2;
  for (long i = 0; i < ns; ++i) x[2 * i] = s[i] - std::floor((dext(d, i - 1) + dext(d, i) + 2.0) / 4.0);
  for (long i = 0; i < nd; ++i) {
    const double right = 2 * i + 2 < n ? x[2 * i + 2] : x[2 * i];
    x[2 * i + 1] = d[i] + std::floor((x[2 * i] + right) / 2.0);
  }
}

void forward97(std::span<const double> x, std::span<double> s, std::span<double> d) {
  check_length(x.size());
  const long n = static_cast<long>(x.size());
  const long nd = n / 2, ns = (n + 1) / 2;
  for (long i = 0; i < nd; ++i) d[i] = x[2 * i + 1] + kAlpha * (x[2 * i] + xext(x, 2 * i + 2));
  std::span<const double> dc(d.data(), static_cast<std::size_t>(nd));
  for (long i = 0; i < ns; ++i) s[i] = x[2 * i] + kBeta * (dext(dc, i - 1) + dext(dc, i));
  std::span<const double> sc(s.data(), static_cast<std::size_t>(ns));
  for (long i = 0; i < nd; ++i) d[i] += kGamma * (s[i] + sext(sc, i + 1, n));
  for (long i = 0; i < ns; ++i) s[i] += kDelta * (dext(dc, i - 1) + dext(dc, i));
  for (long i = 0; i < ns; ++i) s[i] /= kScale;
  for (long i = 0; i < nd; ++i) d[i] *= kScale;
}

void inverse97(std::span<const double> sin, std::span<const double> din, std::span<double> x) {
  const long n = static_cast<long>(x.size());
  check_length(x.size());
  const long nd = n / 2, ns = (n + 1) / 2;
  std::vector<double> s(sin.begin(), sin.begin() + ns), d(din.begin(), din.begin() + nd);
  for (auto& v : s) v *= kScale;
  for (auto& v : d) v /= kScale;
  for (long i = 0; i < ns; ++i) s[i] -= kDelta * (dext(d, i - 1) + dext(d, i));
  for (long i = 0; i < nd; ++i) d[i] -= kGamma * (s[i] + sext(s, i + 1, n));
  for (long i = 0; i < ns; ++i) s[i] -= kBeta * (dext(d, i - 1) + dext(d, i));
  for (long i = 0; i < ns; ++i) x[2 * i] = s[i];
  for (long i = 0; i < nd; ++i) {
    const double right = 2 * i + 2 < n ? s[i + 1] : s[i];
    x[2 * i + 1] = d[i] - kAlpha * (s[i] + right);
  }
}

Split dwt53_1d(std::span<const double> signal) {
  check_length(signal.size());
  Split out{std::vector<double>((signal.size() + 1) / 2), std::vector<double>(signal.size() / 2)};
  forward53(signal, out.approx, out.detail);
  return out;
}

std::vector<double> idwt53_1d(const Split& split) {
  std::vector<double> x(split.approx.size() + split.detail.size());
  if (split.approx.size() != (x.size() + 1) / 2) throw ShapeError("wavelet: inconsistent split sizes");
  inverse53(split.approx, split.detail, x);
  return x;
}

Split dwt97_1d(std::span<const double> signal) {
  check_length(signal.size());
  Split out{std::vector<double>((signal.size() + 1) / 2), std::vector<double>(signal.size() / 2)};
  forward97(signal, out.approx, out.detail);
  return out;
}

std::vector<double> idwt97_1d(const Split& split) {
  std::vector<double> x(split.approx.size() + split.detail.size());
  if (split.approx.size() != (x.size() + 1) / 2) throw ShapeError("wavelet: inconsistent split sizes");
  inverse97(split.approx, split.detail, x);
  return x;
}

std::size_t SubbandPyramid::coefficient_count() const {
  std::size_t n = 0;
  for (const auto& b : bands) n += b.coeffs.size();
  return n;
}

int max_levels(int width, int height) {
  int m = std::min(width, height), l = 0;
  while (m >= 2) {
    m /= 2;
    ++l;
  }
  return l;
}

namespace {

using Lift = void (*)(std::span<const double>, std::span<double>, std::span<double>);
using Unlift = void (*)(std::span<const double>, std::span<const double>, std::span<double>);

// Transforms the top-left cw x ch region of buf (row stride `stride`) in
// place into [L | H] halves along each axis.
void analyze_region(std::vector<double>& buf, int stride, int cw, int ch, Lift lift) {
  std::vector<double> line(static_cast<std::size_t>(std::max(cw, ch)));
  std::vector<double> lo(line.size()), hi(line.size());
  for (int y = 0; y < ch; ++y) {
    double* row = buf.data() + static_cast<std::size_t>(y) * stride;
    std::copy_n(row, cw, line.begin());
    const int ns = (cw + 1) / 2;
    lift(std::span<const double>(line.data(), cw), std::span<double>(lo.data(), ns),
         std::span<double>(hi.data(), cw / 2));
    std::copy_n(lo.begin(), ns, row);
    std::copy_n(hi.begin(), cw / 2, row + ns);
  }
  for (int x = 0; x < cw; ++x) {
    for (int y = 0; y < ch; ++y) line[y] = buf[static_cast<std::size_t>(y) * stride + x];
    const int ns = (ch + 1) / 2;
    lift(std::span<const double>(line.data(), ch), std::span<double>(lo.data(), ns),
         std::span<double>(hi.data(), ch / 2));
    for (int y = 0; y < ns; ++y) buf[static_cast<std::size_t>(y) * stride + x] = lo[y];
    for (int y = 0; y < ch / 2; ++y) buf[static_cast<std::size_t>(y + ns) * stride + x] = hi[y];
  }
}

void synthesize_region(std::vector<double>& buf, int stride, int cw, int ch, Unlift unlift) {
  std::vector<double> line(static_cast<std::size_t>(std::max(cw, ch)));
  std::vector<double> lo(line.size()), hi(line.size());
  for (int x = 0; x < cw; ++x) {
    const int ns = (ch + 1) / 2;
    for (int y = 0; y < ns; ++y) lo[y] = buf[static_cast<std::size_t>(y) * stride + x];
    for (int y = 0; y < ch / 2; ++y) hi[y] = buf[static_cast<std::size_t>(y + ns) * stride + x];
    unlift(std::span<const double>(lo.data(), ns), std::span<const double>(hi.data(), ch / 2),
           std::span<double>(line.data(), ch));
    for (int y = 0; y < ch; ++y) buf[static_cast<std::size_t>(y) * stride + x] = line[y];
  }
  for (int y = 0; y < ch; ++y) {
    double* row = buf.data() + static_cast<std::size_t>(y) * stride;
    const int ns = (cw + 1) / 2;
    std::copy_n(row, ns, lo.begin());
    std::copy_n(row + ns, cw / 2, hi.begin());
    unlift(std::span<const double>(lo.data(), ns), std::span<const double>(hi.data(), cw / 2),
           std::span<double>(line.data(), cw));
    std::copy_n(line.begin(), cw, row);
  }
}

struct Rect {
  int x, y, w, h;
};

// Band rectangles inside the Mallat layout, in pyramid band order.
std::vector<std::pair<Rect, std::pair<int, Orientation>>> band_layout(int width, int height, int levels) {
  std::vector<int> ws{width}, hs{height};
  for (int l = 0; l < levels; ++l) {
    ws.push_back((ws.back() + 1) / 2);
    hs.push_back((hs.back() + 1) / 2);
  }
  std::vector<std::pair<Rect, std::pair<int, Orientation>>> out;
  out.push_back({{0, 0, ws[levels], hs[levels]}, {levels, Orientation::LL}});
  for (int l = levels; l >= 1; --l) {
    const int lw = ws[l], lh = hs[l];            // low-pass sizes at this level
    const int hw = ws[l - 1] - lw, hh = hs[l - 1] - lh;  // high-pass sizes
    out.push_back({{lw, 0, hw, lh}, {l, Orientation::HL}});
    out.push_back({{0, lh, lw, hh}, {l, Orientation::LH}});
    out.push_back({{lw, lh, hw, hh}, {l, Orientation::HH}});
  }
  return out;
}

void check_pyramid_args(int width, int height, int levels) {
  if (levels < 1 || levels > max_levels(width, height))
    throw ParameterError("wavelet: levels must be in [1, " + std::to_string(max_levels(width, height)) + "]");
  const int unit = 1 << levels;
  if (width % unit || height % unit) throw ParameterError("wavelet: dimensions must be multiples of 2^levels");
}

// 1-D energy of the synthesis basis function reached through `lows`
// low-pass steps followed by an optional high-pass step.
double synthesis_energy_1d(Filter filter, int lows, bool high) {
  const int depth = lows + (high ? 1 : 0);
  const int n = 1 << (depth + 6);
  // Lengths at each level.
  std::vector<int> len{n};
  for (int l = 0; l < depth; ++l) len.push_back((len.back() + 1) / 2);
  // Impulse in the middle of the coarsest target band.
  std::vector<double> cur(static_cast<std::size_t>(len[depth]), 0.0);
  std::vector<double> det;
  if (high) {
    det.assign(static_cast<std::size_t>(len[depth - 1] - len[depth]), 0.0);
    det[det.size() / 2] = 1.0;
  } else {
    cur[cur.size() / 2] = 1.0;
  }
  for (int l = depth; l >= 1; --l) {
    std::vector<double> d(static_cast<std::size_t>(len[l - 1] - len[l]), 0.0);
    if (high && l == depth) d = det;
    std::vector<double> x(static_cast<std::size_t>(len[l - 1]));
    if (filter == Filter::irreversible97)
      inverse97(cur, d, x);
    else
      inverse53(cur, d, x);
    cur = std::move(x);
  }
  double e = 0.0;
  for (double v : cur) e += v * v;
  return e;
}

}  // namespace

std::vector<double> subband_weights(Filter filter, int levels) {
  std::vector<double> w;
  const auto layout = band_layout(1 << levels, 1 << levels, levels);
  for (const auto& [rect, id] : layout) {
    if (filter == Filter::reversible53) {
      w.push_back(1.0);
      continue;
    }
    const auto [level, orient] = id;
    const double low = synthesis_energy_1d(filter, level, false);
    const double high = synthesis_energy_1d(filter, level - 1, true);
    switch (orient) {
      case Orientation::LL: w.push_back(low * low); break;
      case Orientation::HL:
      case Orientation::LH: w.push_back(low * high); break;
      case Orientation::HH: w.push_back(high * high); break;
    }
  }
  return w;
}

SubbandPyramid decompose(std::span<const double> plane, int width, int height, int levels, Filter filter) {
  check_pyramid_args(width, height, levels);
  if (plane.size() != static_cast<std::size_t>(width) * height) throw ShapeError("decompose: plane size mismatch");
  std::vector<double> buf(plane.begin(), plane.end());
  const Lift lift = filter == Filter::irreversible97 ? forward97 : forward53;
  int cw = width, ch = height;
  for (int l = 0; l < levels; ++l) {
    analyze_region(buf, width, cw, ch, lift);
    cw = (cw + 1) / 2;
    ch = (ch + 1) / 2;
  }
  SubbandPyramid pyr{levels, filter, width, height, {}};
  const auto weights = subband_weights(filter, levels);
  std::size_t bi = 0;
  for (const auto& [r, id] : band_layout(width, height, levels)) {
    Subband b{id.first, id.second, r.w, r.h, weights[bi++], {}};
    b.coeffs.resize(static_cast<std::size_t>(r.w) * r.h);
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x)
        b.coeffs[static_cast<std::size_t>(y) * r.w + x] = buf[static_cast<std::size_t>(r.y + y) * width + r.x + x];
    pyr.bands.push_back(std::move(b));
  }
  return pyr;
}

SubbandPyramid decompose(const Image& plane, int levels, Filter filter) {
  if (plane.channels() != 1) throw ShapeError("decompose: expected a single-channel plane");
  return decompose(plane.plane(0), plane.width(), plane.height(), levels, filter);
}

std::vector<double> reconstruct(const SubbandPyramid& pyr) {
  check_pyramid_args(pyr.width, pyr.height, pyr.levels);
  const auto layout = band_layout(pyr.width, pyr.height, pyr.levels);
  if (layout.size() != pyr.bands.size()) throw ShapeError("reconstruct: band count mismatch");
  std::vector<double> buf(static_cast<std::size_t>(pyr.width) * pyr.height);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Rect& r = layout[i].first;
    const Subband& b = pyr.bands[i];
    if (b.width != r.w || b.height != r.h || b.coeffs.size() != static_cast<std::size_t>(r.w) * r.h)
      throw ShapeError("reconstruct: band shape mismatch");
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x)
        buf[static_cast<std::size_t>(r.y + y) * pyr.width + r.x + x] = b.coeffs[static_cast<std::size_t>(y) * r.w + x];
  }
  std::vector<int> ws{pyr.width}, hs{pyr.height};
  for (int l = 0; l < pyr.levels; ++l) {
    ws.push_back((ws.back() + 1) / 2);
    hs.push_back((hs.back() + 1) / 2);
  }
  const Unlift unlift = pyr.filter == Filter::irreversible97 ? inverse97 : inverse53;
  for (int l = pyr.levels - 1; l >= 0; --l) synthesize_region(buf, pyr.width, ws[l], hs[l], unlift);
  return buf;
}

}  // namespace cdlab::wavelet
