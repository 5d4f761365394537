#include "qbsde/certs.hpp"
#include "qbsde/cli.hpp"
#include "qbsde/engine.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace qbsde;

namespace {

ProblemInstance remark22(int N, int d) {
    const std::string text = "problem.n = 2\nproblem.d = " + std::to_string(d) + "\nproblem.T = 1\ngrid.N = " +
                             std::to_string(N) +
                             "\ngenerator.catalog = remark22\ngenerator.catalog.delta = 0.5\n"
                             "terminal.1 = 0.5*clamp(w1, -1, 1)\nterminal.2 = 0.5*sin(w1)\nterminal.bound = 0.5\n"
                             "params.gamma = 2.1\nparams.K = 5\nparams.delta = 0.5\nparams.C0 = 3.2\n";
    return load_config_text(text).instance;
}

template <ExecPolicy P>
void BM_BackwardSolve(benchmark::State& state) {
    const ProblemInstance inst = remark22(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const LatticeModel lat(inst.grid, inst.d);
    BackwardOptions o;
    o.policy = P;
    for (auto _ : state) benchmark::DoNotOptimize(backward_solve(inst, lat, o));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(lat.total_nodes()));
}

template <ExecPolicy P>
void BM_Project(benchmark::State& state) {
    const int N = static_cast<int>(state.range(0));
    const LatticeModel lat(TimeGrid(1.0, N), 2, 10'000'000);
    std::vector<double> child(lat.layer_size(N) * 2, 0.25);
    for (auto _ : state) benchmark::DoNotOptimize(project(lat, N - 1, child, 2, P));
}

template <ExecPolicy P>
void BM_LogScan(benchmark::State& state) {
    const LogGrid g{1e-6, 1e6, static_cast<int>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(scan_log_inequality(g, g, g, false, P));
}

} // namespace

BENCHMARK(BM_BackwardSolve<ExecPolicy::Serial>)->Args({200, 1})->Args({60, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardSolve<ExecPolicy::Parallel>)->Args({200, 1})->Args({60, 2})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Project<ExecPolicy::Serial>)->Arg(300);
BENCHMARK(BM_Project<ExecPolicy::Parallel>)->Arg(300);
BENCHMARK(BM_LogScan<ExecPolicy::Serial>)->Arg(60)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LogScan<ExecPolicy::Parallel>)->Arg(60)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
