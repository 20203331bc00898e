#include <benchmark/benchmark.h>

#include "kslab/dynamics.hpp"

using namespace kslab;

static void bm_flow_step(benchmark::State& state) {
    EvolveConfig cfg;
    const auto g = RadialGrid::make(evolve_grid_spec(cfg));
    const FlowSolver solver(g);
    const FlowState start = make_flow_state(initial_data(cfg, g), Frame::Rescaled);
    for (auto _ : state) {
        FlowState st = start;
        solver.step(st, 0.02);
        benchmark::DoNotOptimize(st.pair.density.values.data());
    }
    state.counters["nodes"] = static_cast<double>(g->size());
}
BENCHMARK(bm_flow_step)->Unit(benchmark::kMillisecond);

static void bm_decompose(benchmark::State& state) {
    EvolveConfig cfg;
    const auto g = RadialGrid::make(evolve_grid_spec(cfg));
    const ModulationContext ctx(g, cfg.M);
    const FieldPair p = initial_data(cfg, g);
    for (auto _ : state) benchmark::DoNotOptimize(decompose(p, ctx, cfg.b0, 1.0));
}
BENCHMARK(bm_decompose)->Unit(benchmark::kMillisecond);
