#include <benchmark/benchmark.h>

#include <random>

#include "speccompact/grid.hpp"
#include "speccompact/guardband.hpp"
#include "speccompact/svc.hpp"
#include "speccompact/syngen.hpp"

using namespace speccompact;

namespace {

const std::vector<std::string> kRetained{"s1", "s2", "s4"};
const std::vector<std::string> kRed{"s3"};

Dataset planted(std::size_t n) {
  GeneratorConfig cfg;
  cfg.kind = PopulationKind::PlantedRedundancy;
  cfg.n = n;
  cfg.noise_scale = 0.005;
  return normalize(generate(cfg));
}

const GuardBandModel& model_2d() {
  static const auto gb = train_guard_band(planted(1000), std::vector<std::string>{"s1", "s2"}, kRed, 0.025,
                                          Hyperparams{}, 1);
  return gb;
}

std::vector<std::vector<double>> probes(std::size_t dim, std::size_t count) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.25, 1.25);
  std::vector<std::vector<double>> out(count, std::vector<double>(dim));
  for (auto& p : out) {
    for (auto& v : p) v = u(rng);
  }
  return out;
}

void BM_TrainSvc(benchmark::State& state) {
  const auto ds = planted(static_cast<std::size_t>(state.range(0)));
  const auto x = ds.features(kRetained);
  const auto y = label_pass_fail(ds, kRed).labels;
  for (auto _ : state) benchmark::DoNotOptimize(train_svc(x, y, Hyperparams{}, 1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TrainSvc)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_GuardBandClassify(benchmark::State& state) {
  const auto& gb = model_2d();
  const auto pts = probes(2, 1024);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(classify(gb, pts[k++ & 1023]));
}
BENCHMARK(BM_GuardBandClassify);

void BM_BuildLookupTable(benchmark::State& state) {
  const auto grid = GridSpec::uniform({"s1", "s2"}, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_lookup_table(model_2d(), grid));
}
BENCHMARK(BM_BuildLookupTable)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_LutClassify(benchmark::State& state) {
  const auto lut = build_lookup_table(model_2d(), GridSpec::uniform({"s1", "s2"}, 50));
  const auto pts = probes(2, 1024);
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(lut_classify(lut, pts[k++ & 1023]));
}
BENCHMARK(BM_LutClassify);

}  // namespace

BENCHMARK_MAIN();
