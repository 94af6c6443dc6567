#include <benchmark/benchmark.h>

#include <random>

#include "povmap/gbt.hpp"
#include "povmap/geo.hpp"
#include "povmap/imgcls.hpp"
#include "povmap/osm_features.hpp"
#include "povmap/rasters.hpp"

using namespace povmap;

namespace {

rasters::RasterGrid random_grid(std::size_t n, double cellsize) {
  rasters::RasterGrid g;
  g.nrows = g.ncols = n;
  g.yll = -10.0;
  g.xll = 20.0;
  g.cellsize = cellsize;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 50);
  g.values.resize(n * n);
  for (auto& v : g.values) v = u(rng);
  return g;
}

}  // namespace

static void BM_GbtTrain(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0, 1);
  gbt::Matrix x(n, 78);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 78; ++c) x.at(r, c) = d(rng);
    y[r] = 50 + 10 * x.at(r, 0) - 5 * x.at(r, 3) * x.at(r, 7) + d(rng);
  }
  gbt::GbtConfig cfg;
  cfg.n_estimators = 50;
  for (auto _ : state) benchmark::DoNotOptimize(gbt::train(x, y, cfg));
}
BENCHMARK(BM_GbtTrain)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_WindowStats(benchmark::State& state) {
  const auto g = random_grid(600, 1.0 / 240.0);
  const geo::WindowSpec w(static_cast<double>(state.range(0)) / 10.0);
  const geo::GeoPoint c{-9.4, 21.2};
  for (auto _ : state) benchmark::DoNotOptimize(rasters::window_stats(g, c, w));
}
BENCHMARK(BM_WindowStats)->Arg(16)->Arg(50)->Arg(100);

static void BM_CnnStep(benchmark::State& state) {
  imgcls::ArchSpec arch;
  auto model = imgcls::make_model(arch, 3);
  const std::size_t batch = 16;
  std::vector<double> inputs(batch * 3 * arch.input_size * arch.input_size);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : inputs) v = u(rng);
  std::vector<int> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % 4);
  imgcls::Adam adam(model);
  for (auto _ : state) {
    imgcls::Gradients g;
    benchmark::DoNotOptimize(imgcls::loss_and_gradients(model, inputs, labels, nullptr, &g));
    adam.step(model, g, 1e-4, 1e-3);
  }
}
BENCHMARK(BM_CnnStep)->Unit(benchmark::kMillisecond);

static void BM_FeatureExtraction(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 0.5);
  osm::LayerSet layers;
  for (int i = 0; i < 2000; ++i) {
    osm::Way w;
    w.way_id = "w" + std::to_string(i);
    const geo::GeoPoint a{-10 + u(rng), 20 + u(rng)};
    w.points = {a, {a.lat + 0.002, a.lon + 0.001}, {a.lat + 0.003, a.lon - 0.001}};
    w.highway = osm::RoadClass::kTertiary;
    layers.ways.push_back(w);
  }
  for (int i = 0; i < 3000; ++i) {
    osm::Poi p;
    p.poi_id = "p" + std::to_string(i);
    p.location = {-10 + u(rng), 20 + u(rng)};
    p.category = static_cast<std::uint8_t>(static_cast<std::size_t>(i) % osm::kPoiCategoryCount);
    layers.pois.push_back(p);
  }
  const auto lum = random_grid(240, 1.0 / 240.0);
  const auto pop = random_grid(600, 1.0 / 600.0);
  const osm::FeatureExtractor fx(layers, &lum, &pop);
  std::vector<geo::GeoPoint> at;
  for (int i = 0; i < 100; ++i) at.push_back({-9.9 + 0.8 * u(rng), 20.1 + 0.8 * u(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(fx.extract_all(at));
}
BENCHMARK(BM_FeatureExtraction)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
