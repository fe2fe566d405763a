// Microbenchmarks for the hot paths of one identification iteration, at the
// benchmark-problem size (250 samples, 10 levels, 5 taps, degree 4).

#include <blpv/estimation.hpp>
#include <blpv/hmm.hpp>
#include <blpv/lpv_model.hpp>
#include <blpv/pso.hpp>
#include <blpv/qsvbw.hpp>

#include <benchmark/benchmark.h>

#include <random>

namespace {

struct Fixture {
    blpv::Dataset data;
    blpv::SchedulingGrid grid;
    blpv::CoeffMatrix coeffs;
    std::vector<double> path;
    double sigma2 = 0.05;

    Fixture()
        : data(blpv::benchmark_generator(250, 21.57, 1)),
          grid(blpv::benchmark_grid()),
          coeffs(4, 5),
          path(*data.p_true) {
        std::mt19937_64 rng(2);
        std::normal_distribution<double> gauss(0.0, 0.5);
        for (Eigen::Index i = 0; i < coeffs.entries.size(); ++i) coeffs.entries(i) = gauss(rng);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_emission_table(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state)
        benchmark::DoNotOptimize(blpv::emission_table(f.coeffs, f.grid, f.data, f.sigma2));
}
BENCHMARK(BM_emission_table);

void BM_forward(benchmark::State& state) {
    const Fixture& f = fixture();
    const blpv::EmissionTable emis = blpv::emission_table(f.coeffs, f.grid, f.data, f.sigma2);
    const blpv::HmmParams params{blpv::TransitionMatrix::uniform(f.grid.size()),
                                 blpv::InitialDist::uniform(f.grid.size()), f.sigma2};
    for (auto _ : state) benchmark::DoNotOptimize(blpv::log_forward(params, emis));
}
BENCHMARK(BM_forward);

void BM_viterbi(benchmark::State& state) {
    const Fixture& f = fixture();
    const blpv::EmissionTable emis = blpv::emission_table(f.coeffs, f.grid, f.data, f.sigma2);
    const blpv::HmmParams params{blpv::TransitionMatrix::uniform(f.grid.size()),
                                 blpv::InitialDist::uniform(f.grid.size()), f.sigma2};
    for (auto _ : state) benchmark::DoNotOptimize(blpv::viterbi(params, emis));
}
BENCHMARK(BM_viterbi);

void BM_posteriors(benchmark::State& state) {
    const Fixture& f = fixture();
    const blpv::EmissionTable emis = blpv::emission_table(f.coeffs, f.grid, f.data, f.sigma2);
    const blpv::HmmParams params{blpv::TransitionMatrix::uniform(f.grid.size()),
                                 blpv::InitialDist::uniform(f.grid.size()), f.sigma2};
    for (auto _ : state) benchmark::DoNotOptimize(blpv::posteriors(params, emis));
}
BENCHMARK(BM_posteriors);

void BM_coefficient_sweep(benchmark::State& state) {
    const Fixture& f = fixture();
    const blpv::FitContext ctx(f.data, f.path, 4, 5);
    for (auto _ : state) benchmark::DoNotOptimize(blpv::sweep_H(f.coeffs, ctx, 1));
}
BENCHMARK(BM_coefficient_sweep);

void BM_init_objective_eval(benchmark::State& state) {
    const Fixture& f = fixture();
    const blpv::Objective objective = blpv::init_objective(f.data, f.grid, 4, 5);
    for (auto _ : state) benchmark::DoNotOptimize(objective(f.coeffs));
}
BENCHMARK(BM_init_objective_eval);

}  // namespace

BENCHMARK_MAIN();
