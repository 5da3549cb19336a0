#include "cdlab/ratecontrol.hpp"

#include <cmath>
#include <string>

#include "cdlab/dct_codec.hpp"
#include "cdlab/netpbm.hpp"

namespace cdlab {

std::string_view codec_name(Codec c) { return c == Codec::dct ? "dct" : "wavelet"; }

Codec parse_codec(std::string_view name) {
  if (name == "dct") return Codec::dct;
  if (name == "wavelet") return Codec::wavelet;
  throw ParameterError("unknown codec '" + std::string(name) + "' (expected dct or wavelet)");
}

InfeasibleTarget::InfeasibleTarget(Decibels t, Decibels lo, Decibels hi)
    : std::runtime_error("PSNR target " + t.to_string() + " outside feasible range [" + lo.to_string() + ", " +
                         hi.to_string() + "]"),
      target(t), lowest(lo), highest(hi) {}

namespace {

void check_target(const Image& img, const RateTarget& t) {
  if (img.empty()) throw ShapeError("rate control: empty image");
  if (t.target_db.is_lossless()) throw ParameterError("rate control: target must be finite");
  if (!(t.tolerance_db > 0.0)) throw ParameterError("rate control: tolerance must be > 0");
  if (t.reference && !t.reference->same_shape(img)) throw ShapeError("rate control: reference shape mismatch");
}

const Image& reference_of(const Image& img, const std::optional<Image>& ref) { return ref ? *ref : img; }

double db_distance(Decibels a, Decibels b) {
  if (a.is_lossless() || b.is_lossless()) return a == b ? 0.0 : INFINITY;
  return std::abs(a.value() - b.value());
}

CompressionResult dct_result(const Image& img, const Image& ref, double m, bool subsample) {
  const DctStream s = encode_dct(img, m, subsample);
  CompressionResult r;
  r.codec = Codec::dct;
  r.stream = s.serialize();
  r.decoded = decode_dct(s);
  r.achieved_db = psnr(ref, r.decoded);
  r.byte_size = r.stream.size();
  r.multiplier = m;
  return r;
}

}  // namespace

CompressionResult compress_to_psnr_dct(const Image& img, const RateTarget& target, const DctRateOptions& opt) {
  check_target(img, target);
  if (!(opt.m_min > 0.0) || !(opt.m_max > opt.m_min)) throw ParameterError("rate control: bad multiplier bracket");
  if (opt.max_evaluations < 2) throw ParameterError("rate control: need at least two evaluations");
  const Image& ref = reference_of(img, target.reference);
  const Decibels goal = target.target_db;
  int evals = 0;
  auto eval = [&](double m) {
    ++evals;
    return dct_result(img, ref, m, opt.subsample);
  };

  CompressionResult fine = eval(opt.m_min);
  CompressionResult coarse = eval(opt.m_max);
  if (goal > fine.achieved_db || goal < coarse.achieved_db)
    throw InfeasibleTarget(goal, coarse.achieved_db, fine.achieved_db);

  CompressionResult best = db_distance(fine.achieved_db, goal) <= db_distance(coarse.achieved_db, goal) ? fine : coarse;
  double lo = opt.m_min, hi = opt.m_max;  // PSNR(lo) >= goal >= PSNR(hi)
  while (db_distance(best.achieved_db, goal) > target.tolerance_db && evals < opt.max_evaluations) {
    const double mid = std::sqrt(lo * hi);
    CompressionResult r = eval(mid);
    if (r.achieved_db >= goal)
      lo = mid;
    else
      hi = mid;
    if (db_distance(r.achieved_db, goal) < db_distance(best.achieved_db, goal)) best = std::move(r);
  }
  best.exact_hit = db_distance(best.achieved_db, goal) <= target.tolerance_db;
  best.evaluations = evals;
  return best;
}

CompressionResult wavelet_result_at(const EmbeddedStream& full, std::uint64_t offset, const Image& reference) {
  const EmbeddedStream cut = full.truncated(offset);
  CompressionResult r;
  r.codec = Codec::wavelet;
  r.stream = cut.serialize();
  r.decoded = decode_embedded(cut);
  r.achieved_db = psnr(reference, r.decoded);
  r.byte_size = r.stream.size();
  r.offset = offset;
  return r;
}

CompressionResult wavelet_select(const EmbeddedStream& full, const Image& img, const RateTarget& target,
                                 double tolerance_db) {
  check_target(img, target);
  const Decibels goal = target.target_db;
  const auto& pts = full.truncation;

  // Table distortions are measured against the encoder input; any other
  // reference needs its own decodes.
  std::vector<Decibels> db;
  if (!target.reference || *target.reference == img) {
    for (const auto& p : pts) db.push_back(psnr_from_mse(p.mse));
  } else {
    for (const auto& p : pts) db.push_back(psnr(*target.reference, decode_embedded(full, p.offset)));
  }
  Decibels lowest = db.front(), highest = db.front();
  for (const auto& d : db) {
    if (d < lowest) lowest = d;
    if (d > highest) highest = d;
  }
  if (goal > highest || goal < lowest) throw InfeasibleTarget(goal, lowest, highest);

  std::size_t k = 0;
  while (db[k] < goal) ++k;
  CompressionResult r = wavelet_result_at(full, pts[k].offset, reference_of(img, target.reference));
  r.exact_hit = r.achieved_db >= goal && db_distance(r.achieved_db, goal) <= tolerance_db;
  r.evaluations = 1;
  return r;
}

CompressionResult compress_to_psnr_wavelet(const Image& img, const RateTarget& target,
                                           const WaveletRateOptions& opt) {
  check_target(img, target);
  return wavelet_select(encode_embedded(img, opt.encoder), img, target, opt.tolerance_db);
}

CompressionResult compress_to_psnr(Codec codec, const Image& img, const RateTarget& target) {
  if (codec == Codec::dct) return compress_to_psnr_dct(img, target);
  RateTarget t = target;
  t.tolerance_db = std::max(t.tolerance_db, WaveletRateOptions{}.tolerance_db);
  return compress_to_psnr_wavelet(img, t, WaveletRateOptions{{}, t.tolerance_db});
}

CompressionResult compress_max(const Image& img, Codec codec, const std::optional<Image>& reference) {
  if (img.empty()) throw ShapeError("rate control: empty image");
  const Image& ref = reference_of(img, reference);
  CompressionResult r;
  if (codec == Codec::dct) {
    r = dct_result(img, ref, DctRateOptions{}.m_max, false);
  } else {
    const EmbeddedStream full = encode_embedded(img);
    r = wavelet_result_at(full, full.truncation.front().offset, ref);
  }
  r.evaluations = 1;
  return r;
}

Image decode_any(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 4 && bytes[0] == 'D' && bytes[1] == 'C' && bytes[2] == 'X' && bytes[3] == '1')
    return decode_dct(DctStream::parse(bytes));
  if (bytes.size() >= 4 && bytes[0] == 'W' && bytes[1] == 'V' && bytes[2] == 'X' && bytes[3] == '1')
    return decode_embedded(EmbeddedStream::parse(bytes));
  throw FormatError("unrecognised stream: expected DCX1 or WVX1 magic at byte offset 0");
}

}  // namespace cdlab
