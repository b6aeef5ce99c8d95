// Serial references against the OpenMP kernels.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "spgnm/environments.hpp"
#include "spgnm/gradient.hpp"
#include "spgnm/harness.hpp"

using namespace spgnm;

namespace {

const TabularMdp& mdp() {
    static const TabularMdp m = five_state_problem();
    return m;
}

void BM_FiniteDifferenceSerial(benchmark::State& state) {
    const auto theta = five_state_hard_init();
    for (auto _ : state)
        benchmark::DoNotOptimize(reference::finite_difference_gradient(mdp(), theta, mdp().initial_dist(), 1e-5));
}
BENCHMARK(BM_FiniteDifferenceSerial);

void BM_FiniteDifferenceParallel(benchmark::State& state) {
    omp_set_num_threads(static_cast<int>(state.range(0)));
    const auto theta = five_state_hard_init();
    for (auto _ : state)
        benchmark::DoNotOptimize(finite_difference_gradient(mdp(), theta, mdp().initial_dist(), 1e-5));
}
BENCHMARK(BM_FiniteDifferenceParallel)->Arg(1)->Arg(2)->Arg(4);

const SamplingOptions kSampling{4096, 50, 11, false};

void BM_SampledGradientSerial(benchmark::State& state) {
    const auto theta = five_state_hard_init();
    for (auto _ : state)
        benchmark::DoNotOptimize(reference::sampled_gradient_stats(mdp(), theta, mdp().initial_dist(), kSampling));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(kSampling.batch));
}
BENCHMARK(BM_SampledGradientSerial)->Unit(benchmark::kMillisecond);

void BM_SampledGradientParallel(benchmark::State& state) {
    omp_set_num_threads(static_cast<int>(state.range(0)));
    const auto theta = five_state_hard_init();
    for (auto _ : state)
        benchmark::DoNotOptimize(sampled_gradient_stats(mdp(), theta, mdp().initial_dist(), kSampling));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(kSampling.batch));
}
BENCHMARK(BM_SampledGradientParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_CompareFanOut(benchmark::State& state) {
    std::vector<ExperimentConfig> configs;
    for (const auto& opt : optimizer_names()) {
        ExperimentConfig c;
        c.environment = "mdp-hard";
        c.optimizer = opt;
        c.iterations = 500;
        c.record_every = 500;
        configs.push_back(c);
    }
    for (auto _ : state) benchmark::DoNotOptimize(compare(configs, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CompareFanOut)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
