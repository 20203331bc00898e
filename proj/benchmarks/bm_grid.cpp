#include <benchmark/benchmark.h>

#include <cmath>

#include "kslab/ground_state.hpp"
#include "kslab/radial_grid.hpp"

using namespace kslab;

namespace {

GridPtr grid_with(double h0) {
    GridSpec s;
    s.h0 = h0;
    s.stretch = h0;
    s.r_max = 1e3;
    return RadialGrid::make(s);
}

}  // namespace

static void bm_derivative(benchmark::State& state) {
    const auto g = grid_with(1.0 / static_cast<double>(state.range(0)));
    const auto f = make_field(g, closed::Q, Parity::Even);
    for (auto _ : state) benchmark::DoNotOptimize(derivative(f, 1));
    state.counters["nodes"] = static_cast<double>(g->size());
}
BENCHMARK(bm_derivative)->RangeMultiplier(4)->Range(16, 1024);

static void bm_poisson_field(benchmark::State& state) {
    const auto g = grid_with(1.0 / static_cast<double>(state.range(0)));
    const auto f = make_field(g, closed::LambdaQ, Parity::Even);
    for (auto _ : state) benchmark::DoNotOptimize(poisson_field(f));
    state.counters["nodes"] = static_cast<double>(g->size());
}
BENCHMARK(bm_poisson_field)->RangeMultiplier(4)->Range(16, 1024);

static void bm_grid_build(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(grid_with(0.01));
}
BENCHMARK(bm_grid_build);
