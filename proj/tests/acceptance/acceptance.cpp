// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cdlab/attacks.hpp"
#include "cdlab/dataset.hpp"
#include "cdlab/dct_codec.hpp"
#include "cdlab/embedded.hpp"
#include "cdlab/harness.hpp"
#include "cdlab/model.hpp"
#include "cdlab/netpbm.hpp"
#include "cdlab/ratecontrol.hpp"
#include "golden_inputs.hpp"
#include "reference_mlp.hpp"
#include "support.hpp"

namespace cdlab {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_abs(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

constexpr double kTargets[] = {23.0, 25.0, 28.0, 31.0};

// ---------------------------------------------------------------------------
// Shared inputs

struct Natural {
  std::vector<Image> images;
  // [image][target] results; empty optional = infeasible.
  std::vector<std::vector<std::optional<CompressionResult>>> dct, wavelet;
};

struct Desk {
  std::filesystem::path dir;
  ExperimentGrid grid;
  Report report;
  Dataset test;
  Model model;  // seed 1, trained outside the harness
};

const AttackConfig kAttacks[] = {
    {AttackKind::fgsm, 20.0}, {AttackKind::fgsm, 10.0}, {AttackKind::fgsm, 5.0}, {AttackKind::bim, 15.0}};
const std::uint64_t kSeeds[] = {1, 2, 3};

// ---------------------------------------------------------------------------

// One 2-D 5/3 level on a w x h plane of any size: rows, then columns, each
// stored as [approx | detail]. The inverse runs columns first.
std::vector<double> separable53(const std::vector<double>& in, int w, int h, bool forward) {
  std::vector<double> out = in, line;
  auto pass = [&](int count, int len, auto at) {
    for (int k = 0; k < count; ++k) {
      line.resize(static_cast<std::size_t>(len));
      for (int i = 0; i < len; ++i) line[i] = out[at(k, i)];
      std::vector<double> r;
      if (forward) {
        const auto s = wavelet::dwt53_1d(line);
        r = s.approx;
        r.insert(r.end(), s.detail.begin(), s.detail.end());
      } else {
        const long na = (len + 1) / 2;
        r = wavelet::idwt53_1d({{line.begin(), line.begin() + na}, {line.begin() + na, line.end()}});
      }
      for (int i = 0; i < len; ++i) out[at(k, i)] = r[i];
    }
  };
  auto row = [&](int y, int x) { return static_cast<std::size_t>(y) * w + x; };
  auto col = [&](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  if (forward) {
    pass(h, w, row);
    pass(w, h, col);
  } else {
    pass(w, h, col);
    pass(h, w, row);
  }
  return out;
}

Outcome transform_exactness() {
  Rng rng(101);
  double dct_err = 0.0;
  for (int t = 0; t < 1000; ++t) {
    dct::Block b;
    for (double& v : b) v = rng.uniform(0.0, 255.0);
    dct_err = std::max(dct_err, max_abs(dct::idct8x8(dct::fdct8x8(b)), b));
  }
  int signal_fail = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> x(2 + rng.below(100));
    for (double& v : x) v = static_cast<double>(rng.integer(-512, 512));
    signal_fail += wavelet::idwt53_1d(wavelet::dwt53_1d(x)) != x;
  }
  // One separable 5/3 level on arbitrary (often odd) sizes, then the padded
  // multilevel codec path at unit step.
  int image_fail = 0;
  for (int t = 0; t < 100; ++t) {
    const int w = 9 + static_cast<int>(rng.below(60)), h = 9 + static_cast<int>(rng.below(60));
    const Image img = testing::random_image(w, h, 1, 1000 + t);
    const std::vector<double> x(img.samples().begin(), img.samples().end());
    const auto fwd = separable53(x, w, h, true);
    const bool integer = std::all_of(fwd.begin(), fwd.end(), [](double v) { return v == std::floor(v); });
    bool ok = integer && separable53(fwd, w, h, false) == x;
    EmbeddedOptions o;
    o.filter = wavelet::Filter::reversible53;
    o.base_step = 1.0;
    o.max_points = 8;
    ok = ok && decode_embedded(encode_embedded(img, o)) == img;
    image_fail += !ok;
  }
  double w97 = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Image img = testing::random_image(128, 96, 1, 2000 + t, false);
    const auto rec = wavelet::reconstruct(wavelet::decompose(img, 5, wavelet::Filter::irreversible97));
    w97 = std::max(w97, max_abs(rec, img.samples()));
  }
  return {dct_err <= 1e-9 && signal_fail == 0 && image_fail == 0 && w97 <= 1e-5,
          fmt("dct max err %.2e, 5/3 signal failures %d/10000, 5/3 image failures %d/100, 9/7 max err %.2e",
              dct_err, signal_fail, image_fail, w97)};
}

Outcome entropy_losslessness() {
  int dct_fail = 0, wav_fail = 0;
  double wav_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int ch = i % 4 == 0 ? 3 : 1;
    const Image img = testing::random_image(17 + 3 * i, 64 - i / 2, ch, 3000 + i);
    for (double m : {0.25, 1.0, 4.0, 16.0}) {
      const auto ref = dct_quantized_planes(img, m);
      const auto got = decode_dct_coefficients(DctStream::parse(encode_dct(img, m).serialize()));
      bool same = ref.size() == got.size();
      for (std::size_t c = 0; same && c < ref.size(); ++c) same = ref[c].blocks == got[c].blocks;
      dct_fail += !same;
    }
    EmbeddedOptions o;
    o.max_points = 32;
    const Image full = decode_embedded(EmbeddedStream::parse(encode_embedded(img, o).serialize()));
    const Image q = wavelet_quantize_only(img, default_levels(img.width(), img.height()), o.filter, o.base_step);
    const double e = max_abs(full.samples(), q.samples());
    wav_err = std::max(wav_err, e);
    wav_fail += e > 1e-5;
  }
  return {dct_fail == 0 && wav_fail == 0,
          fmt("dct coefficient mismatches %d/200, wavelet max diff %.2e", dct_fail, wav_err)};
}

Outcome psnr_targeting(Natural& nat) {
  const std::size_t n = nat.images.size();
  nat.dct.assign(n, {});
  nat.wavelet.assign(n, {});
  int dct_hits = 0, wav_hits = 0, dct_flagged = 0, silent = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Image& img = nat.images[i];
    const EmbeddedStream full = encode_embedded(img);
    for (double t : kTargets) {
      RateTarget rt;
      rt.target_db = Decibels::finite(t);
      ++total;
      try {
        auto r = compress_to_psnr_dct(img, rt);
        const bool within = std::abs(r.achieved_db.value() - t) <= 0.01;
        dct_hits += within;
        silent += r.exact_hit != within;
        dct_flagged += !r.exact_hit;
        nat.dct[i].push_back(std::move(r));
      } catch (const InfeasibleTarget&) {
        ++dct_flagged;
        nat.dct[i].push_back(std::nullopt);
      }
      try {
        auto r = wavelet_select(full, img, rt);
        const double d = r.achieved_db.value() - t;
        const bool within = d >= 0.0 && d <= 0.25;
        wav_hits += within;
        silent += r.exact_hit != within;
        nat.wavelet[i].push_back(std::move(r));
      } catch (const InfeasibleTarget&) {
        nat.wavelet[i].push_back(std::nullopt);
      }
    }
  }
  const double dr = static_cast<double>(dct_hits) / total, wr = static_cast<double>(wav_hits) / total;
  return {dr >= 0.95 && wr >= 0.90 && silent == 0,
          fmt("dct within 0.01 dB: %d/%d (%.1f%%, %d flagged), wavelet within [0, 0.25] dB: %d/%d (%.1f%%), "
              "unflagged misses %d",
              dct_hits, total, 100 * dr, dct_flagged, wav_hits, total, 100 * wr, silent)};
}

Outcome monotonicity(const Natural& nat) {
  int dct_fail = 0;
  for (const auto& img : nat.images) {
    std::size_t last_size = SIZE_MAX;
    Decibels last_db = Decibels::lossless();
    for (double m : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      const DctStream s = encode_dct(img, m);
      const Decibels db = psnr(img, decode_dct(s));
      dct_fail += s.byte_size() > last_size || db > last_db;
      last_size = s.byte_size();
      last_db = db;
    }
  }
  int wav_fail = 0;
  std::size_t points = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const Image& img = nat.images[i];
    const EmbeddedStream s = EmbeddedStream::parse(encode_embedded(img).serialize());
    double last = INFINITY;
    for (const auto& tp : s.truncation) {
      const double measured = mse(img, decode_embedded(s, tp.offset));
      wav_fail += tp.mse > last || std::abs(measured - tp.mse) > 1e-9 * std::max(1.0, tp.mse);
      last = tp.mse;
      ++points;
    }
  }
  return {dct_fail == 0 && wav_fail == 0,
          fmt("dct violations %d over %zu images x 7 multipliers, wavelet violations %d over %zu decoded offsets",
              dct_fail, nat.images.size(), wav_fail, points)};
}

Outcome gradient_correctness(const Desk& desk) {
  Rng rng(202);
  int probes = 0, skipped = 0;
  double worst = 0.0;
  while (probes < 100) {
    const auto& s = desk.test.samples[rng.below(desk.test.size())];
    const LossGrad lg = loss_and_input_grad(desk.model, s.image, s.label);
    const std::size_t px = rng.below(s.image.sample_count());
    const auto err = testing::gradient_probe_error(desk.model, s.image, s.label, px, lg.grad.samples()[px]);
    if (!err) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, *err);
    ++probes;
  }
  double logit_err = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& s = desk.test.samples[i];
    const LossGrad lg = loss_and_input_grad(desk.model, s.image, s.label);
    const auto z = testing::reference_forward(desk.model, s.image).logits;
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double expect = std::exp(z[k] - mx) / sum - (static_cast<int>(k) == s.label ? 1.0 : 0.0);
      logit_err = std::max(logit_err, std::abs(lg.dlogits[k] - expect));
    }
  }
  return {worst < 1e-4 && logit_err <= 1e-10,
          fmt("worst relative FD error %.2e over 100 probes (%d skipped at ReLU kinks), logit grad err %.2e", worst,
              skipped, logit_err)};
}

Outcome attack_contracts(const Desk& desk) {
  int ball_fail = 0, identity_fail = 0, bim_fgsm_fail = 0, iterations = 0;
  auto linf = [](const Image& a, const Image& b) { return max_abs(a.samples(), b.samples()); };
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& s = desk.test.samples[i];
    for (double eps : {5.0, 10.0, 20.0}) ball_fail += linf(fgsm(desk.model, s.image, s.label, eps), s.image) > eps;
    const Image b = bim(desk.model, s.image, s.label, 15.0, 1.0, bim_default_iterations(15.0),
                        [&](int, const Image& x) {
                          ++iterations;
                          ball_fail += linf(x, s.image) > 15.0;
                        });
    ball_fail += linf(b, s.image) > 15.0;
    identity_fail += fgsm(desk.model, s.image, s.label, 0.0) != s.image;
    for (double eps : {5.0, 10.0, 15.0, 20.0})
      bim_fgsm_fail += bim(desk.model, s.image, s.label, eps, eps, 1) != fgsm(desk.model, s.image, s.label, eps);
  }
  return {ball_fail == 0 && identity_fail == 0 && bim_fgsm_fail == 0,
          fmt("ball violations %d (%d BIM iterates checked), eps=0 mismatches %d, BIM(1, alpha=eps) != FGSM %d",
              ball_fail, iterations, identity_fail, bim_fgsm_fail)};
}

const AccuracyCell& cell(const Report& r, std::uint64_t seed, const AttackConfig& a, const std::string& codec,
                         const std::string& setting) {
  const AccuracyCell* c = r.find(seed, std::string(attack_name(a.kind)), a.epsilon, codec, setting);
  if (!c) throw std::runtime_error("missing cell " + a.label() + "/" + codec + "/" + setting);
  return *c;
}

double acc(const AccuracyCell& c) { return c.accuracy().value_or(std::nan("")); }

Outcome attack_potency(const Desk& desk) {
  const Report& r = desk.report;
  const double clean = acc(*r.find(1, "none", 0.0, "uncompressed", "none"));
  const double f10 = acc(cell(r, 1, kAttacks[1], "uncompressed", "none"));
  const double b15 = acc(cell(r, 1, kAttacks[3], "uncompressed", "none"));
  std::vector<Image> adv;
  std::vector<int> labels;
  for (const auto& s : desk.test.samples) {
    adv.push_back(fgsm(desk.model, s.image, s.label, 15.0));
    labels.push_back(s.label);
  }
  const double f15 = evaluate_accuracy(desk.model, adv, labels);
  return {clean - f10 >= 0.20 && b15 <= f15,
          fmt("clean %.3f, FGSM eps=10 %.3f (drop %.3f), BIM eps=15 %.3f vs FGSM eps=15 %.3f", clean, f10,
              clean - f10, b15, f15)};
}

Outcome defense_effect(const Desk& desk) {
  bool all = true;
  std::string detail;
  for (const auto& a : kAttacks) {
    double best = -1.0;
    std::string where;
    for (const char* codec : {"dct", "wavelet"})
      for (double t : kTargets) {
        std::vector<double> gains;
        for (std::uint64_t seed : kSeeds)
          gains.push_back(acc(cell(desk.report, seed, a, codec, fmt("%g", t))) -
                          acc(cell(desk.report, seed, a, "uncompressed", "none")));
        const double m = median(gains);
        if (m > best) {
          best = m;
          where = fmt("%s@%g", codec, t);
        }
      }
    all = all && best >= 0.05;
    detail += fmt("%s%s best median gain %+.3f (%s)", detail.empty() ? "" : "; ", a.label().c_str(), best,
                  where.c_str());
  }
  return {all, detail};
}

Outcome max_compression(const Natural& nat, const Desk& desk) {
  int size_fail = 0;
  std::vector<double> dct_sizes, wav_sizes;
  for (const auto& img : nat.images) {
    const auto d = compress_max(img, Codec::dct);
    const auto w = compress_max(img, Codec::wavelet);
    size_fail += w.byte_size >= d.byte_size;
    dct_sizes.push_back(static_cast<double>(d.byte_size));
    wav_sizes.push_back(static_cast<double>(w.byte_size));
  }
  std::vector<double> dct_acc, wav_acc;
  for (std::uint64_t seed : kSeeds) {
    dct_acc.push_back(acc(cell(desk.report, seed, kAttacks[3], "dct", "max")));
    wav_acc.push_back(acc(cell(desk.report, seed, kAttacks[3], "wavelet", "max")));
  }
  const double md = median(dct_acc), mw = median(wav_acc);
  return {size_fail == 0 && mw >= md,
          fmt("wavelet smaller on %zu/%zu images (median %.0f vs %.0f bytes); BIM eps=15 max-compression accuracy "
              "median wavelet %.3f vs dct %.3f",
              nat.images.size() - size_fail, nat.images.size(), median(wav_sizes), median(dct_sizes), mw, md)};
}

Outcome blocking_asymmetry(const Natural& nat) {
  std::vector<double> dct_gain, wav_gain;
  for (std::size_t i = 0; i < nat.images.size(); ++i) {
    const double base = blockiness(nat.images[i]);
    if (nat.dct[i][0]) dct_gain.push_back(blockiness(nat.dct[i][0]->decoded) - base);
    if (nat.wavelet[i][0]) wav_gain.push_back(blockiness(nat.wavelet[i][0]->decoded) - base);
  }
  if (dct_gain.empty() || wav_gain.empty()) return {false, "no feasible 23 dB results"};
  const double md = median(dct_gain), mw = median(wav_gain);
  return {md > mw, fmt("median blockiness increase at 23 dB: dct %.3f, wavelet %.3f (%zu / %zu images)", md, mw,
                       dct_gain.size(), wav_gain.size())};
}

Outcome determinism_and_formats(const Desk& desk) {
  ExperimentGrid g = desk.grid;
  g.seeds = {1};
  g.limit = 200;
  g.workers = 1;
  const std::string a = report_to_json(run_experiment(g));
  g.workers = 3;
  const std::string b = report_to_json(run_experiment(g));
  const Report small = report_from_json(a);
  const bool same_model = !small.model_hashes.empty() && !desk.report.model_hashes.empty() &&
                          small.model_hashes[0].second == desk.report.model_hashes[0].second;

  const std::filesystem::path golden = CDLAB_GOLDEN_DIR;
  int golden_fail = 0;
  auto same = [&](const char* name, const std::vector<std::uint8_t>& bytes) {
    golden_fail += read_file(golden / name) != bytes;
  };
  same("pattern_gray.dcx", encode_dct(testing::pattern(24, 20, 1), 1.5).serialize());
  same("pattern_color.dcx", encode_dct(testing::pattern(20, 18, 3), 0.75, true).serialize());
  EmbeddedOptions o97;
  o97.levels = 2;
  o97.max_points = 16;
  o97.point_spacing_db = 1.0;
  same("pattern_97.wvx", encode_embedded(testing::pattern(24, 20, 1), o97).serialize());
  EmbeddedOptions o53;
  o53.filter = wavelet::Filter::reversible53;
  o53.levels = 3;
  o53.base_step = 0.5;
  o53.max_points = 16;
  same("pattern_53.wvx", encode_embedded(testing::pattern(16, 16, 3), o53).serialize());
  Model tiny(4, 3, 1, {5}, 3);
  tiny.initialize(42);
  same("tiny.cdm", save_model(tiny));
  TableOptions bold;
  bold.bold_best = true;
  const std::string t1 = emit_table(testing::published_report(false), bold);
  TableOptions max = bold;
  max.kind = TableKind::max;
  const std::string t2 = emit_table(testing::published_report(true), max);
  same("table_psnr.md", std::vector<std::uint8_t>(t1.begin(), t1.end()));
  same("table_max.md", std::vector<std::uint8_t>(t2.begin(), t2.end()));
  const bool cells_ok = t1.find("|  | 25 | 0.337 | 0.436 | **0.577** | 0.429 |") != std::string::npos &&
                        t2.find("| wavelet | **0.428** | **0.523** | **0.634** | **0.511** |") != std::string::npos;
  return {a == b && same_model && golden_fail == 0 && cells_ok,
          fmt("rerun reports %s (%zu bytes), seed-1 model hash %s, golden mismatches %d/7, table cells %s",
              a == b ? "identical" : "DIFFER", a.size(), same_model ? "matches" : "DIFFERS", golden_fail,
              cells_ok ? "in place" : "MISPLACED")};
}

// ---------------------------------------------------------------------------

Desk build_desk() {
  Desk d;
  d.dir = testing::temp_dir("acceptance");
  const Dataset train_set = synth::desk_dataset(5000, 71, "train");
  d.test = synth::desk_dataset(1000, 72, "test");
  save_dataset(train_set, d.dir / "train");
  save_dataset(d.test, d.dir / "test");
  d.grid.dataset = (d.dir / "test").string();
  d.grid.train_dataset = (d.dir / "train").string();
  d.grid.attacks.assign(std::begin(kAttacks), std::end(kAttacks));
  d.grid.codecs = {Codec::dct, Codec::wavelet};
  d.grid.seeds.assign(std::begin(kSeeds), std::end(kSeeds));
  d.report = run_experiment(d.grid);
  TrainConfig cfg = d.grid.train;
  cfg.seed = 1;
  d.model = train(load_dataset(d.grid.train_dataset, synth::kDeskClasses), cfg);
  return d;
}

}  // namespace
}  // namespace cdlab

int main() {
  using namespace cdlab;
  const auto start = Clock::now();
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "transform exactness", transform_exactness);
  report(2, "entropy losslessness", entropy_losslessness);

  Natural nat;
  nat.images = synth::natural_corpus(50, 256, 91);
  report(3, "PSNR targeting", [&] { return psnr_targeting(nat); });
  report(4, "monotonicity", [&] { return monotonicity(nat); });

  std::optional<Desk> desk;
  std::string desk_error;
  const auto t0 = Clock::now();
  try {
    desk = build_desk();
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  std::printf("     desk experiment: 5000 train / 1000 test images, 3 seeds [%.1f s]\n",
              std::chrono::duration<double>(Clock::now() - t0).count());
  auto with_desk = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!desk) return {false, "desk experiment failed: " + desk_error};
      return fn(*desk);
    };
  };
  report(5, "gradient correctness", with_desk([](const Desk& d) { return gradient_correctness(d); }));
  report(6, "attack contracts", with_desk([](const Desk& d) { return attack_contracts(d); }));
  report(7, "attack potency", with_desk([](const Desk& d) { return attack_potency(d); }));
  report(8, "defense effect", with_desk([](const Desk& d) { return defense_effect(d); }));
  report(9, "max-compression ordering", with_desk([&](const Desk& d) { return max_compression(nat, d); }));
  report(10, "blocking asymmetry", [&] { return blocking_asymmetry(nat); });
  report(11, "determinism and formats", with_desk([](const Desk& d) { return determinism_and_formats(d); }));

  const double total = std::chrono::duration<double>(Clock::now() - start).count();
  const bool fast = total < 900.0;
  failures += !fast;
  std::printf("%s criterion 12 (runtime): %.1f s total, limit 900 s\n", fast ? "PASS" : "FAIL", total);
  if (desk) {
    std::printf("\nDesk results, pooled over seeds:\n%s", emit_table(desk->report, {}).c_str());
    TableOptions max;
    max.kind = TableKind::max;
    std::printf("\n%s", emit_table(desk->report, max).c_str());
  }
  std::printf("\n%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
