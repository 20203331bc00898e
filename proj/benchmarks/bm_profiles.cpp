#include <benchmark/benchmark.h>

#include <cmath>

#include "kslab/profiles.hpp"

using namespace kslab;

static void bm_level_one(benchmark::State& state) {
    const auto g = RadialGrid::make(profile_grid_spec(1e-4));
    for (auto _ : state) benchmark::DoNotOptimize(build_T1S1(g));
}
BENCHMARK(bm_level_one)->Unit(benchmark::kMillisecond);

// range(0) is -log10 b.
static void bm_profile_family(benchmark::State& state) {
    const double b = std::pow(10.0, -static_cast<double>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build_profile_family(b));
}
BENCHMARK(bm_profile_family)->DenseRange(3, 7, 2)->Unit(benchmark::kMillisecond);
