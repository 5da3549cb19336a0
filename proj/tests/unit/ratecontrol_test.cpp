#include <gtest/gtest.h>

#include <algorithm>

#include "cdlab/dataset.hpp"
#include "cdlab/dct_codec.hpp"
#include "cdlab/netpbm.hpp"
#include "cdlab/ratecontrol.hpp"
#include "support.hpp"

namespace cdlab {
namespace {

RateTarget target(double db, std::optional<Image> ref = std::nullopt) {
  RateTarget t;
  t.target_db = Decibels::finite(db);
  t.reference = std::move(ref);
  return t;
}

const std::vector<Image>& corpus() {
  static const auto c = synth::natural_corpus(8, 96, 41);
  return c;
}

TEST(RateControlDct, HitsTargetsWithinTolerance) {
  for (const auto& img : corpus())
    for (double db : {23.0, 25.0, 28.0, 31.0}) {
      const CompressionResult r = compress_to_psnr_dct(img, target(db));
      EXPECT_TRUE(r.exact_hit) << db << " got " << r.achieved_db.value();
      EXPECT_NEAR(r.achieved_db.value(), db, 0.01);
      EXPECT_LE(r.evaluations, 60);
      // Independent re-measurement from the stored bytes.
      EXPECT_DOUBLE_EQ(psnr(img, decode_any(r.stream)).value(), r.achieved_db.value());
      EXPECT_EQ(r.byte_size, r.stream.size());
      EXPECT_EQ(DctStream::parse(r.stream).multiplier, r.multiplier);
    }
}

TEST(RateControlDct, HigherTargetsCostMoreBytes) {
  for (const auto& img : corpus()) {
    std::size_t last = 0;
    for (double db : {23.0, 25.0, 28.0, 31.0}) {
      const auto r = compress_to_psnr_dct(img, target(db));
      EXPECT_GE(r.byte_size, last);
      last = r.byte_size;
    }
  }
}

TEST(RateControlDct, InfeasibleTargetsReportRange) {
  const Image& img = corpus()[0];
  try {
    compress_to_psnr_dct(img, target(90.0));
    FAIL();
  } catch (const InfeasibleTarget& e) {
    EXPECT_LT(e.highest.value(), 90.0);
    EXPECT_LT(e.lowest, e.highest);
  }
  EXPECT_THROW(compress_to_psnr_dct(img, target(2.0)), InfeasibleTarget);
}

TEST(RateControlDct, MeasuresAgainstReference) {
  const Image clean = corpus()[1];
  Image noisy = clean;
  Rng rng(5);
  for (double& v : noisy.samples_mut()) v = std::clamp(v + (rng.uniform() < 0.5 ? -6.0 : 6.0), 0.0, 255.0);
  const auto r = compress_to_psnr_dct(noisy, target(25.0, clean));
  EXPECT_NEAR(psnr(clean, r.decoded).value(), 25.0, 0.01);
  EXPECT_THROW(compress_to_psnr_dct(noisy, target(25.0, Image(8, 8, 1))), ShapeError);
}

TEST(RateControlWavelet, EarliestPointAtOrAboveTarget) {
  int hits = 0, total = 0;
  for (const auto& img : corpus()) {
    const EmbeddedStream full = encode_embedded(img);
    for (double db : {23.0, 25.0, 28.0, 31.0}) {
      const auto r = wavelet_select(full, img, target(db));
      EXPECT_GE(r.achieved_db.value(), db);
      EXPECT_EQ(r.exact_hit, r.achieved_db.value() - db <= 0.25);
      hits += r.exact_hit;
      ++total;
      EXPECT_DOUBLE_EQ(psnr(img, decode_any(r.stream)).value(), r.achieved_db.value());
      // The point before the chosen one must fall short.
      const auto it = std::find_if(full.truncation.begin(), full.truncation.end(),
                                   [&](const auto& t) { return t.offset == r.offset; });
      ASSERT_NE(it, full.truncation.end());
      if (it != full.truncation.begin())
        EXPECT_LT(psnr(img, decode_embedded(full, std::prev(it)->offset)).value(), db);
    }
  }
  // Small images have coarse low-rate steps; the 256x256 rate is checked in
  // the acceptance suite.
  EXPECT_GE(hits, total * 8 / 10);
}

TEST(RateControlWavelet, ReferenceUsesActualDecodes) {
  const Image clean = corpus()[2];
  Image shifted = clean;
  for (double& v : shifted.samples_mut()) v = std::min(255.0, v + 3.0);
  const auto r = compress_to_psnr_wavelet(shifted, target(28.0, clean));
  EXPECT_GE(psnr(clean, r.decoded).value(), 28.0);
  EXPECT_DOUBLE_EQ(psnr(clean, r.decoded).value(), r.achieved_db.value());
}

TEST(RateControlWavelet, Infeasible) {
  EXPECT_THROW(compress_to_psnr_wavelet(corpus()[0], target(300.0)), InfeasibleTarget);
  EXPECT_THROW(compress_to_psnr_wavelet(corpus()[0], target(1.0)), InfeasibleTarget);
}

TEST(CompressMax, SmallestStreams) {
  for (const auto& img : corpus()) {
    const auto d = compress_max(img, Codec::dct);
    EXPECT_EQ(DctStream::parse(d.stream).multiplier, 256.0);
    EXPECT_LE(d.byte_size, compress_to_psnr_dct(img, target(23.0)).byte_size);
    const auto w = compress_max(img, Codec::wavelet);
    const EmbeddedStream full = encode_embedded(img);
    EXPECT_EQ(w.offset, full.truncation.front().offset);
    EXPECT_LE(w.byte_size, compress_to_psnr_wavelet(img, target(23.0)).byte_size);
    EXPECT_LT(w.achieved_db.value(), 23.0);
  }
}

// Constant images at maximum compression: both streams are dominated by fixed
// overhead. At m = 256 the DC step is 4096, above the largest possible DC
// coefficient (1016), so every DCT block decodes to mid-grey.
TEST(CompressMax, ConstantImages) {
  for (double v : {17.0, 128.0, 200.0}) {
    const Image img(256, 256, 1, v);
    const auto d = compress_max(img, Codec::dct);
    EXPECT_EQ(d.byte_size, DctStream::kHeaderBytes + 768u);
    for (double x : d.decoded.samples()) ASSERT_EQ(x, 128.0);
    const auto w = compress_max(img, Codec::wavelet);
    EXPECT_LT(w.byte_size, 100u);
    // The first point codes only part of the coarsest LL band, so the output is
    // blotchy rather than flat.
    for (double x : w.decoded.samples()) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 255.0);
    }
  }
}

TEST(RateControl, WaveletAddsNoBlocking) {
  std::vector<double> dct_gain, wav_gain;
  for (const auto& img : corpus()) {
    const double base = blockiness(img);
    dct_gain.push_back(blockiness(compress_to_psnr_dct(img, target(23.0)).decoded) - base);
    wav_gain.push_back(blockiness(compress_to_psnr_wavelet(img, target(23.0)).decoded) - base);
  }
  std::sort(dct_gain.begin(), dct_gain.end());
  std::sort(wav_gain.begin(), wav_gain.end());
  const double md = 0.5 * (dct_gain[3] + dct_gain[4]), mw = 0.5 * (wav_gain[3] + wav_gain[4]);
  EXPECT_LE(mw, 0.5);
  EXPECT_GT(md, mw);
}

TEST(DecodeAny, RejectsUnknownMagic) {
  EXPECT_THROW(decode_any({'J', 'P', 'E', 'G', 0, 0}), FormatError);
  EXPECT_THROW(decode_any({}), FormatError);
}

TEST(CodecNames, RoundTrip) {
  EXPECT_EQ(parse_codec("dct"), Codec::dct);
  EXPECT_EQ(parse_codec(codec_name(Codec::wavelet)), Codec::wavelet);
  EXPECT_THROW(parse_codec("jpeg"), ParameterError);
}

}  // namespace
}  // namespace cdlab
