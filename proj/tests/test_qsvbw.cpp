#include <blpv/evalio.hpp>
#include <blpv/qsvbw.hpp>

#include <doctest.h>

#include <cmath>
#include <random>

using namespace blpv;

namespace {

// polynomial LPV system on a grid with no affine automorphism, so the level
// labeling is identifiable from data
struct Synthetic {
    Dataset data;
    SchedulingGrid grid{std::vector<double>{0.2, 0.5, 0.9}};
    CoeffMatrix truth{1, 2};
    std::vector<double> path;
};

Synthetic make_synthetic(std::size_t n, double noise_std, std::uint64_t seed) {
    Synthetic s;
    s.truth.entries << 2.0, -1.5, 0.3, 0.8;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> level(0, 2);
    std::uniform_int_distribution<int> dwell(8, 20);

    std::vector<double> u(n);
    for (auto& v : u) v = gauss(rng);
    s.path.resize(n);
    std::size_t k = 0;
    while (k < n) {
        const double value = s.grid.level(level(rng));
        for (int i = dwell(rng); i > 0 && k < n; --i, ++k) s.path[k] = value;
    }
    s.data = simulate(LpvFirModel{s.truth, s.grid, noise_std}, u, s.path, seed + 1);
    return s;
}

QsvbwConfig base_config(const SchedulingGrid& grid, int n_taps, int degree) {
    QsvbwConfig cfg{grid};
    cfg.n_taps = n_taps;
    cfg.degree_candidates = {degree};
    cfg.swarm.seed = 17;
    cfg.swarm.n_iters = 60;
    return cfg;
}

}  // namespace

TEST_CASE("noise-free synthetic system is recovered exactly") {
    const Synthetic s = make_synthetic(200, 0.0, 2);
    QsvbwConfig cfg = base_config(s.grid, 2, 1);
    cfg.sweeps_per_iter = 3;
    cfg.max_iters = 300;
    cfg.loglik_rel_tol = 1e-12;

    const QsvbwResult res = run(s.data, cfg);
    REQUIRE(res.path.size() == s.data.size());
    CHECK(res.path == s.path);

    const FitContext ctx(s.data, res.path, 1, 2);
    CHECK(objective_J(res.coeffs, ctx) < 1e-10);
}

TEST_CASE("a single iteration leaves a length-one trace") {
    const Synthetic s = make_synthetic(80, 0.1, 3);
    QsvbwConfig cfg = base_config(s.grid, 2, 1);
    cfg.max_iters = 1;
    const QsvbwResult res = run(s.data, cfg);
    CHECK(res.loglik_trace.size() == 1);
    CHECK(res.iterations_run == 1);
}

TEST_CASE("runs are deterministic for a fixed seed") {
    const Synthetic s = make_synthetic(120, 0.05, 4);
    QsvbwConfig cfg = base_config(s.grid, 2, 1);
    cfg.max_iters = 25;
    const QsvbwResult a = run(s.data, cfg);
    const QsvbwResult b = run(s.data, cfg);
    CHECK(a.coeffs.entries.cwiseEqual(b.coeffs.entries).all());
    CHECK(a.path == b.path);
    CHECK(a.loglik_trace == b.loglik_trace);
    CHECK(a.hmm.sigma2 == b.hmm.sigma2);
}

TEST_CASE("identically zero input is rejected as unidentifiable") {
    Dataset data;
    data.u.assign(50, 0.0);
    data.y.assign(50, 1.0);
    const QsvbwConfig cfg = base_config(SchedulingGrid({0.2, 0.5, 0.9}), 2, 1);
    CHECK_THROWS_WITH_AS(run(data, cfg), doctest::Contains("unidentifiable"),
                         std::invalid_argument);
}

TEST_CASE("trace is non-decreasing and iterates stay on the simplex") {
    for (std::uint64_t seed : {5, 6, 7}) {
        const Synthetic s = make_synthetic(150, 0.1, seed);
        QsvbwConfig cfg = base_config(s.grid, 2, 1);
        cfg.max_iters = 60;
        const QsvbwResult res = run(s.data, cfg);

        for (std::size_t t = 1; t < res.loglik_trace.size(); ++t)
            CHECK(res.loglik_trace[t] >= res.loglik_trace[t - 1] - 1e-6);

        CHECK((res.hmm.a.a.array() >= 0.0).all());
        for (Eigen::Index i = 0; i < res.hmm.a.a.rows(); ++i)
            CHECK(std::abs(res.hmm.a.a.row(i).sum() - 1.0) <= 1e-12);
        CHECK(std::abs(res.hmm.pi.pi.sum() - 1.0) <= 1e-12);

        REQUIRE(res.path.size() == s.data.size());
        for (double p : res.path) CHECK(s.grid.contains(p));
    }
}

TEST_CASE("complete-data log-likelihood agrees with the viterbi score at the decoded path") {
    const Synthetic s = make_synthetic(90, 0.2, 11);
    QsvbwConfig cfg = base_config(s.grid, 2, 1);
    cfg.max_iters = 10;
    const QsvbwResult res = run(s.data, cfg);

    const EmissionTable emis = emission_table(res.coeffs, s.grid, s.data, res.hmm.sigma2);
    const ViterbiResult vit = viterbi(res.hmm, emis);
    const double joint =
        complete_data_log_likelihood(res.coeffs, s.grid, res.hmm, s.data, vit.path);
    CHECK(joint == doctest::Approx(vit.log_score).epsilon(1e-9));
}

TEST_CASE("decode_and_predict reproduces a noise-free system") {
    const Synthetic s = make_synthetic(100, 0.0, 13);
    // build the "fitted" model from the ground truth
    const std::size_t m = s.grid.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(m, m, 0.05 / double(m - 1));
    a.diagonal().setConstant(0.95);
    for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) /= a.row(i).sum();
    const HmmParams hmm{TransitionMatrix(a), InitialDist::uniform(m), 1e-6};

    const Prediction pred = decode_and_predict(s.truth, s.grid, hmm, s.data);
    CHECK(pred.p_hat == s.path);
    for (std::size_t k = 0; k < s.data.size(); ++k)
        CHECK(pred.y_hat[k] == doctest::Approx(s.data.y[k]).epsilon(1e-10));
}

TEST_CASE("degree selection") {
    SUBCASE("a single candidate comes back unchanged") {
        const Synthetic s = make_synthetic(60, 0.1, 17);
        QsvbwConfig cfg = base_config(s.grid, 2, 1);
        cfg.degree_candidates = {3};
        CHECK(select_degree(s.data, cfg) == 3);
    }
    SUBCASE("an exact quadratic dependency is identified across seeds") {
        int hits = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SchedulingGrid grid({0.15, 0.45, 0.8});
            CoeffMatrix truth(2, 2);
            truth.entries << 1.8, -1.1, -0.6, 0.9, 0.4, 0.7;

            std::mt19937_64 rng(100 + seed);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::uniform_int_distribution<std::size_t> level(0, 2);
            std::uniform_int_distribution<int> dwell(8, 20);
            const std::size_t n = 240;
            std::vector<double> u(n), path(n);
            for (auto& v : u) v = gauss(rng);
            std::size_t k = 0;
            while (k < n) {
                const double value = grid.level(level(rng));
                for (int i = dwell(rng); i > 0 && k < n; --i, ++k) path[k] = value;
            }
            const Dataset data =
                simulate(LpvFirModel{truth, grid, 0.02}, u, path, 300 + seed);

            QsvbwConfig cfg = base_config(grid, 2, 2);
            cfg.degree_candidates = {1, 2, 3};
            cfg.sweeps_per_iter = 3;
            cfg.swarm.seed = 400 + seed;
            if (select_degree(data, cfg) == 2) ++hits;
        }
        CHECK(hits >= 8);
    }
}
