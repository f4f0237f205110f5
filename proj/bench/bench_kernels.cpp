// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "eegvad/eeg_features.hpp"
#include "eegvad/filter.hpp"
#include "eegvad/kpca.hpp"
#include "eegvad/mfcc.hpp"
#include "eegvad/rng.hpp"

using namespace eegvad;

namespace {

RowMatrix noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng = derive_rng(seed, {});
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gaussian(rng);
  return m;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void BM_Preprocess(benchmark::State& state) {
  const TimeSeries eeg = make_series(noise(31, 10000, 1), 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_eeg(eeg, {}, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * eeg.data.size());
}

void BM_EegFeatures(benchmark::State& state) {
  const TimeSeries eeg = make_series(noise(31, 10000, 2), 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(extract_eeg_features(eeg, {}, exec_of(state)));
}

void BM_Mfcc(benchmark::State& state) {
  const TimeSeries audio = make_series(noise(1, 160000, 3), 16000.0);
  for (auto _ : state) benchmark::DoNotOptimize(extract_mfcc(audio, {}, exec_of(state)));
}

void BM_Gram(benchmark::State& state) {
  const RowMatrix x = noise(state.range(1), 155, 4);
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix(x, {}, exec_of(state)));
}

void BM_KpcaTransform(benchmark::State& state) {
  const KpcaModel model = kpca_fit(noise(1000, 155, 5), 30, {}, Exec::serial);
  const RowMatrix frames = noise(state.range(1), 155, 6);
  for (auto _ : state) benchmark::DoNotOptimize(kpca_transform(model, frames, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

}  // namespace

BENCHMARK(BM_Preprocess)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EegFeatures)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Mfcc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gram)->Args({0, 1000})->Args({1, 1000})->Args({0, 2000})->Args({1, 2000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KpcaTransform)->Args({0, 1000})->Args({1, 1000})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
