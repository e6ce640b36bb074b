#include <benchmark/benchmark.h>

#include <random>

#include "hyperaug/augment.hpp"
#include "hyperaug/cnn.hpp"
#include "hyperaug/pca.hpp"
#include "hyperaug/tta.hpp"

using namespace hyperaug;

namespace {

/// Pavia-sized balanced training set: 9 classes x 225 pixels x 103 bands.
std::vector<Spectrum> pavia_sized_train() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0, 0.05);
  std::vector<Spectrum> out;
  for (ClassId c = 1; c <= 9; ++c)
    for (int i = 0; i < 225; ++i) {
      Spectrum s;
      for (int j = 0; j < 103; ++j) s.bands.push_back(0.1 * c + 0.01 * j + noise(rng));
      s.label = c;
      s.coord = Coord{c, static_cast<std::uint32_t>(i)};
      out.push_back(std::move(s));
    }
  return out;
}

const std::vector<Spectrum>& train_set() {
  static const auto set = pavia_sized_train();
  return set;
}

CnnClassifier default_classifier() {
  CNNConfig c;
  c.bands = 103;
  c.classes = 9;
  return CnnClassifier(init_model(c), MinMaxNormalizer::fit(train_set()));
}

}  // namespace

static void BM_PcaFit(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(train_set()));
}
BENCHMARK(BM_PcaFit)->Unit(benchmark::kMillisecond);

static void BM_OfflinePcaEnlarge(benchmark::State& state) {
  const auto aug = make_augmenter({.method = AugmentMethod::Pca}, train_set());
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(offline_enlarge(train_set(), *aug, ++seed));
}
BENCHMARK(BM_OfflinePcaEnlarge)->Unit(benchmark::kMillisecond);

static void BM_CnnInferenceBatch(benchmark::State& state) {
  const auto classifier = default_classifier();
  const std::span<const Spectrum> batch(train_set().data(), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(classifier.predict_proba(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CnnInferenceBatch)->Arg(1)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_TtaPerSample(benchmark::State& state) {
  const auto classifier = default_classifier();
  const auto aug = make_augmenter({.method = AugmentMethod::Pca}, train_set());
  const auto samples = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& x = train_set()[i++ % train_set().size()];
    benchmark::DoNotOptimize(
        tta_classify(classifier, samples ? aug.get() : nullptr, x, {.samples = samples}, rng));
  }
}
BENCHMARK(BM_TtaPerSample)->Arg(0)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_TrainEpoch(benchmark::State& state) {
  CNNConfig c;
  c.bands = 103;
  c.classes = 9;
  c.max_epochs = 1;
  const auto norm = MinMaxNormalizer::fit(train_set());
  const auto data = norm.apply(train_set());
  const std::span<const Spectrum> val(data.data(), 225);
  for (auto _ : state) benchmark::DoNotOptimize(train(init_model(c), data, val));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kSecond)->Iterations(1);
BENCHMARK_MAIN();
