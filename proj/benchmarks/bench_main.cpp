#include <benchmark/benchmark.h>

#include <map>

#include "cdlab/attacks.hpp"
#include "cdlab/dataset.hpp"
#include "cdlab/dct_codec.hpp"
#include "cdlab/embedded.hpp"
#include "cdlab/model.hpp"
#include "cdlab/ratecontrol.hpp"

namespace {

using namespace cdlab;

const Image& natural(int size) {
  static std::map<int, Image> cache;
  auto it = cache.find(size);
  if (it == cache.end()) it = cache.emplace(size, synth::natural_image(size, 7)).first;
  return it->second;
}

const Model& desk_model() {
  static const Model m = [] {
    TrainConfig cfg;
    cfg.epochs = 2;
    return train(synth::desk_dataset(500, 3, "train"), cfg);
  }();
  return m;
}

void BM_Fdct8x8(benchmark::State& state) {
  dct::Block b;
  for (int i = 0; i < 64; ++i) b[i] = (i * 37) % 256;
  for (auto _ : state) benchmark::DoNotOptimize(dct::fdct8x8(b));
}
BENCHMARK(BM_Fdct8x8);

void BM_DctEncode(benchmark::State& state) {
  const Image& img = natural(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encode_dct(img, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(img.sample_count()));
}
BENCHMARK(BM_DctEncode)->Arg(64)->Arg(256);

void BM_DctDecode(benchmark::State& state) {
  const DctStream s = encode_dct(natural(static_cast<int>(state.range(0))), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(decode_dct(s));
}
BENCHMARK(BM_DctDecode)->Arg(64)->Arg(256);

void BM_Dwt97(benchmark::State& state) {
  const Image& img = natural(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(wavelet::decompose(img, 5, wavelet::Filter::irreversible97));
}
BENCHMARK(BM_Dwt97)->Arg(64)->Arg(256);

void BM_EmbeddedEncode(benchmark::State& state) {
  const Image& img = natural(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encode_embedded(img));
}
BENCHMARK(BM_EmbeddedEncode)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EmbeddedDecodeFull(benchmark::State& state) {
  const EmbeddedStream s = encode_embedded(natural(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(decode_embedded(s));
}
BENCHMARK(BM_EmbeddedDecodeFull)->Arg(64)->Arg(256);

void BM_RateControlDct(benchmark::State& state) {
  const Image& img = natural(256);
  RateTarget t;
  t.target_db = Decibels::finite(28.0);
  for (auto _ : state) benchmark::DoNotOptimize(compress_to_psnr_dct(img, t));
}
BENCHMARK(BM_RateControlDct)->Unit(benchmark::kMillisecond);

void BM_ModelGradient(benchmark::State& state) {
  const Image img = synth::desk_image(3, 11);
  const Model& m = desk_model();
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_input_grad(m, img, 3));
}
BENCHMARK(BM_ModelGradient);

void BM_Bim15(benchmark::State& state) {
  const Image img = synth::desk_image(4, 12);
  const Model& m = desk_model();
  for (auto _ : state) benchmark::DoNotOptimize(run_attack(m, img, 4, {AttackKind::bim, 15.0}));
}
BENCHMARK(BM_Bim15);

}  // namespace

BENCHMARK_MAIN();
