#include <benchmark/benchmark.h>

#include "ampcal/bayescnv.hpp"
#include "ampcal/imputation.hpp"
#include "ampcal/inference.hpp"
#include "ampcal/model.hpp"
#include "ampcal/rng.hpp"
#include "ampcal/synth.hpp"
#include "ampcal/tolerance.hpp"

#include <random>

using namespace ampcal;

namespace {

std::vector<double> normals(std::size_t n, double sd, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = nd(gen);
    return v;
}

void BM_GammaMle(benchmark::State& state) {
    const auto x = normals(static_cast<std::size_t>(state.range(0)), 0.1, 1);
    GammaSufficient st;
    for (double v : x) st.add(v * v, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(gamma_mle(st));
}
BENCHMARK(BM_GammaMle)->Arg(14)->Arg(50)->Arg(1000);

void BM_ImputeTopM(benchmark::State& state) {
    const auto x = normals(static_cast<std::size_t>(state.range(0)), 0.1, 2);
    const std::size_t m = x.size() / 5;
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(impute_top_m(x, m, ++seed));
}
BENCHMARK(BM_ImputeTopM)->Arg(14)->Arg(50)->Arg(500);

void BM_FitGene(benchmark::State& state) {
    const auto x = normals(50, 0.1, 3);
    ToleranceConfig tc;
    tc.repetitions = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fit_gene(x, tc, nullptr, 7, "G"));
}
BENCHMARK(BM_FitGene)->Arg(1)->Arg(25);

void BM_MapEstimate(benchmark::State& state) {
    auto spec = SynthSpec::default_panel();
    const auto cohort = gen_panel(spec, 1);
    for (auto _ : state) benchmark::DoNotOptimize(map_estimate(cohort.samples[0], ModelHyperParams{}));
}
BENCHMARK(BM_MapEstimate)->Unit(benchmark::kMillisecond);

void BM_HmcDefaultPanel(benchmark::State& state) {
    auto spec = SynthSpec::default_panel();
    const auto cohort = gen_panel(spec, 1);
    FitOptions fo;
    fo.hmc.n_draws = static_cast<std::size_t>(state.range(0));
    fo.hmc.seed = 11;
    for (auto _ : state) benchmark::DoNotOptimize(fit_sample(cohort.samples[0], ModelHyperParams{}, fo));
}
BENCHMARK(BM_HmcDefaultPanel)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Hpd(benchmark::State& state) {
    const auto x = normals(static_cast<std::size_t>(state.range(0)), 1.0, 4);
    for (auto _ : state) benchmark::DoNotOptimize(hpd_interval(x, 0.95));
}
BENCHMARK(BM_Hpd)->Arg(1000)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
