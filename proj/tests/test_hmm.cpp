#include <blpv/hmm.hpp>

#include <doctest.h>

#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace blpv;

namespace {

// random simplex-valued chain parameters and a random emission table
struct RandomInstance {
    HmmParams params;
    EmissionTable emis;
};

RandomInstance random_instance(std::mt19937_64& rng, std::size_t n_max = 8, std::size_t m_max = 4) {
    std::uniform_int_distribution<std::size_t> nd(1, n_max), md(2, m_max);
    const auto n = static_cast<Eigen::Index>(nd(rng));
    const auto m = static_cast<Eigen::Index>(md(rng));
    std::uniform_real_distribution<double> unit(0.01, 1.0);

    Eigen::MatrixXd a(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) a(i, j) = unit(rng);
        a.row(i) /= a.row(i).sum();
    }
    Eigen::VectorXd pi(m);
    for (Eigen::Index j = 0; j < m; ++j) pi(j) = unit(rng);
    pi /= pi.sum();

    EmissionTable emis;
    emis.log_b.resize(n, m);
    std::uniform_real_distribution<double> lb(-5.0, 0.0);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < m; ++j) emis.log_b(k, j) = lb(rng);

    return RandomInstance{HmmParams{TransitionMatrix(a), InitialDist(pi), 1.0}, emis};
}

}  // namespace

TEST_CASE("simplex validation") {
    Eigen::MatrixXd bad(2, 2);
    bad << 0.5, 0.5, -0.1, 1.1;
    CHECK_THROWS_AS(TransitionMatrix{bad}, std::invalid_argument);
    bad << 0.5, 0.6, 0.5, 0.5;
    CHECK_THROWS_AS(TransitionMatrix{bad}, std::invalid_argument);
    CHECK_NOTHROW(TransitionMatrix::uniform(10));

    Eigen::VectorXd p(3);
    p << 0.2, 0.2, 0.2;
    CHECK_THROWS_AS(InitialDist{p}, std::invalid_argument);
    CHECK_NOTHROW(InitialDist::uniform(7));
}

TEST_CASE("logsumexp") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(logsumexp(Eigen::VectorXd{}) == -inf);
    Eigen::VectorXd all_neg_inf = Eigen::VectorXd::Constant(3, -inf);
    CHECK(logsumexp(all_neg_inf) == -inf);
    Eigen::VectorXd x(3);
    x << -1000.0, -1000.0, -1000.0;
    CHECK(logsumexp(x) == doctest::Approx(-1000.0 + std::log(3.0)).epsilon(1e-14));
    x << -1e308, -1e308, -1e308;
    CHECK(std::isfinite(logsumexp(x)));
}

TEST_CASE("emission table") {
    const SchedulingGrid grid({0.2, 0.5, 0.9});
    CoeffMatrix coeffs(1, 2);
    coeffs.entries << 0.5, -0.3, 1.0, 0.2;

    Dataset data;
    data.u = {1.0, -0.5, 2.0, 0.3, -1.2};
    data.y = {0.7, 0.1, -0.4, 1.0, 0.2};

    SUBCASE("rejects non-positive variance") {
        CHECK_THROWS_AS(emission_table(coeffs, grid, data, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(emission_table(coeffs, grid, data, -1.0), std::invalid_argument);
    }
    SUBCASE("zero residual hits the normalization constant") {
        const double sigma2 = 0.04;
        Dataset exact = data;
        exact.y[0] = mean_output(coeffs, grid.level(1), regressor(exact.u, 1, 2));
        const EmissionTable table = emission_table(coeffs, grid, exact, sigma2);
        CHECK(table.log_b(0, 1) ==
              doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * sigma2)).epsilon(1e-14));
    }
    SUBCASE("doubling the residual lowers the log density by 3 r^2 / (2 sigma2)") {
        const double sigma2 = 0.25;
        const double mu = mean_output(coeffs, grid.level(0), regressor(data.u, 1, 2));
        const double r = 0.35;
        Dataset one = data, two = data;
        one.y[0] = mu + r;
        two.y[0] = mu + 2.0 * r;
        const double drop = emission_table(coeffs, grid, one, sigma2).log_b(0, 0) -
                            emission_table(coeffs, grid, two, sigma2).log_b(0, 0);
        CHECK(drop == doctest::Approx(3.0 * r * r / (2.0 * sigma2)).epsilon(1e-12));
    }
    SUBCASE("full table matches direct scalar density evaluation") {
        const double sigma2 = 0.16;
        const EmissionTable table = emission_table(coeffs, grid, data, sigma2);
        REQUIRE(table.n_samples() == 5);
        REQUIRE(table.n_states() == 3);
        for (std::size_t k = 1; k <= 5; ++k) {
            const Eigen::VectorXd phi = regressor(data.u, k, 2);
            for (std::size_t j = 0; j < 3; ++j) {
                const double mu = oracle::explicit_poly_mean(coeffs.entries, grid.level(j), phi);
                const double r = data.y[k - 1] - mu;
                const double expect =
                    -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - r * r / (2.0 * sigma2);
                CHECK(table.log_b(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j)) ==
                      doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("forward recursion") {
    SUBCASE("single-sample base case") {
        std::mt19937_64 rng(3);
        const RandomInstance inst = [&] {
            RandomInstance r = random_instance(rng);
            r.emis.log_b.conservativeResize(1, Eigen::NoChange);
            return r;
        }();
        Eigen::VectorXd terms(inst.emis.log_b.cols());
        for (Eigen::Index j = 0; j < terms.size(); ++j)
            terms(j) = std::log(inst.params.pi.pi(j)) + inst.emis.log_b(0, j);
        const ForwardResult fwd = log_forward(inst.params, inst.emis);
        CHECK(fwd.log_likelihood == doctest::Approx(logsumexp(terms)).epsilon(1e-14));
    }
    SUBCASE("uniform chain with constant emissions") {
        const std::size_t n = 12, m = 3;
        const double log_c = -1.7;
        EmissionTable emis;
        emis.log_b = Eigen::MatrixXd::Constant(n, m, log_c);
        const HmmParams params{TransitionMatrix::uniform(m), InitialDist::uniform(m), 1.0};
        const ForwardResult fwd = log_forward(params, emis);
        CHECK(fwd.log_likelihood == doctest::Approx(double(n) * log_c).epsilon(1e-12));
    }
    SUBCASE("matches exhaustive path-sum on random instances") {
        std::mt19937_64 rng(17);
        for (int trial = 0; trial < 200; ++trial) {
            const RandomInstance inst = random_instance(rng);
            const double expect = oracle::path_sum_loglik(inst.params, inst.emis);
            const ForwardResult fwd = log_forward(inst.params, inst.emis);
            CHECK(fwd.log_likelihood == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("viterbi") {
    SUBCASE("strongly peaked emissions recover the generating path") {
        const std::size_t n = 30, m = 4;
        std::mt19937_64 rng(5);
        std::uniform_int_distribution<std::size_t> sd(0, m - 1);
        std::vector<std::size_t> truth(n);
        EmissionTable emis;
        emis.log_b = Eigen::MatrixXd::Constant(n, m, -50.0);
        for (std::size_t k = 0; k < n; ++k) {
            truth[k] = sd(rng);
            emis.log_b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(truth[k])) = -0.5;
        }
        const HmmParams params{TransitionMatrix::uniform(m), InitialDist::uniform(m), 1.0};
        CHECK(viterbi(params, emis).path == truth);
    }
    SUBCASE("matches exhaustive argmax on random instances") {
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 200; ++trial) {
            const RandomInstance inst = random_instance(rng);
            const auto [expect_path, expect_score] = oracle::best_path(inst.params, inst.emis);
            const ViterbiResult got = viterbi(inst.params, inst.emis);
            CHECK(got.path == expect_path);
            CHECK(got.log_score == doctest::Approx(expect_score).epsilon(1e-9));
        }
    }
    SUBCASE("all-tied instance resolves to the lowest states") {
        const std::size_t n = 6, m = 3;
        EmissionTable emis;
        emis.log_b = Eigen::MatrixXd::Constant(n, m, -1.25);
        const HmmParams params{TransitionMatrix::uniform(m), InitialDist::uniform(m), 1.0};
        const ViterbiResult got = viterbi(params, emis);
        const auto [expect_path, expect_score] = oracle::best_path(params, emis);
        CHECK(got.path == std::vector<std::size_t>(n, 0));
        CHECK(got.path == expect_path);
        CHECK(got.log_score == doctest::Approx(expect_score).epsilon(1e-12));
    }
    SUBCASE("max over paths never beats the sum over paths") {
        std::mt19937_64 rng(29);
        for (int trial = 0; trial < 100; ++trial) {
            const RandomInstance inst = random_instance(rng);
            CHECK(viterbi(inst.params, inst.emis).log_score <=
                  log_forward(inst.params, inst.emis).log_likelihood + 1e-12);
        }
    }
}

TEST_CASE("posteriors") {
    SUBCASE("single sample") {
        std::mt19937_64 rng(31);
        RandomInstance inst = random_instance(rng);
        inst.emis.log_b.conservativeResize(1, Eigen::NoChange);
        const Posteriors post = posteriors(inst.params, inst.emis);
        REQUIRE(post.gamma.rows() == 1);
        CHECK(post.xi.empty());
        Eigen::VectorXd expect(inst.emis.log_b.cols());
        for (Eigen::Index j = 0; j < expect.size(); ++j)
            expect(j) = inst.params.pi.pi(j) * std::exp(inst.emis.log_b(0, j));
        expect /= expect.sum();
        for (Eigen::Index j = 0; j < expect.size(); ++j)
            CHECK(post.gamma(0, j) == doctest::Approx(expect(j)).epsilon(1e-12));
    }
    SUBCASE("rows normalize and marginalization identity holds") {
        std::mt19937_64 rng(37);
        for (int trial = 0; trial < 100; ++trial) {
            const RandomInstance inst = random_instance(rng);
            const Posteriors post = posteriors(inst.params, inst.emis);
            const auto n = post.gamma.rows();
            const auto m = post.gamma.cols();
            for (Eigen::Index k = 0; k < n; ++k)
                CHECK(std::abs(post.gamma.row(k).sum() - 1.0) < 1e-10);
            for (Eigen::Index k = 0; k + 1 < n; ++k) {
                CHECK(std::abs(post.xi[static_cast<std::size_t>(k)].sum() - 1.0) < 1e-10);
                for (Eigen::Index i = 0; i < m; ++i)
                    CHECK(post.gamma(k, i) ==
                          doctest::Approx(post.xi[static_cast<std::size_t>(k)].row(i).sum())
                              .epsilon(1e-10));
            }
        }
    }
    SUBCASE("matches exhaustive state marginals") {
        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 100; ++trial) {
            const RandomInstance inst = random_instance(rng);
            const Eigen::MatrixXd expect = oracle::state_marginals(inst.params, inst.emis);
            const Posteriors post = posteriors(inst.params, inst.emis);
            CHECK((post.gamma - expect).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("baum-welch update") {
    SUBCASE("single state") {
        Posteriors post;
        post.gamma = Eigen::MatrixXd::Ones(4, 1);
        post.xi.assign(3, Eigen::MatrixXd::Ones(1, 1));
        const BaumWelchEstimate est = baum_welch_update(post);
        CHECK(est.a.a(0, 0) == 1.0);
        CHECK(est.pi.pi(0) == 1.0);
    }
    SUBCASE("posterior concentrated on one path gives empirical counts") {
        // path 0 -> 1 -> 1 -> 0 over 3 states
        const std::vector<std::size_t> path{0, 1, 1, 0};
        const std::size_t m = 3;
        Posteriors post;
        post.gamma = Eigen::MatrixXd::Zero(4, m);
        for (std::size_t k = 0; k < path.size(); ++k)
            post.gamma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(path[k])) = 1.0;
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            Eigen::MatrixXd slice = Eigen::MatrixXd::Zero(m, m);
            slice(static_cast<Eigen::Index>(path[k]), static_cast<Eigen::Index>(path[k + 1])) = 1.0;
            post.xi.push_back(slice);
        }
        const BaumWelchEstimate est = baum_welch_update(post);
        CHECK(est.a.a(0, 1) == doctest::Approx(1.0));   // 0 always moved to 1
        CHECK(est.a.a(1, 1) == doctest::Approx(0.5));   // 1 split between 1 and 0
        CHECK(est.a.a(1, 0) == doctest::Approx(0.5));
        // state 2 never occupied: uniform row
        for (Eigen::Index j = 0; j < 3; ++j)
            CHECK(est.a.a(2, j) == doctest::Approx(1.0 / 3.0));
        CHECK(est.pi.pi(0) == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("chain re-estimation never lowers the marginal likelihood") {
        std::mt19937_64 rng(43);
        for (int trial = 0; trial < 100; ++trial) {
            const RandomInstance inst = random_instance(rng);
            const double before = log_forward(inst.params, inst.emis).log_likelihood;
            const BaumWelchEstimate est = baum_welch_update(posteriors(inst.params, inst.emis));
            const HmmParams updated{est.a, est.pi, inst.params.sigma2};
            const double after = log_forward(updated, inst.emis).log_likelihood;
            CHECK(after >= before - 1e-10);
        }
    }
}

TEST_CASE("log-space pipeline survives sub-1e-300 densities") {
    const std::size_t n = 40, m = 3;
    EmissionTable emis;
    emis.log_b = Eigen::MatrixXd::Constant(n, m, -5000.0);  // densities ~ e^-5000
    for (std::size_t k = 0; k < n; ++k)
        emis.log_b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k % m)) = -4000.0;
    const HmmParams params{TransitionMatrix::uniform(m), InitialDist::uniform(m), 1.0};

    const ForwardResult fwd = log_forward(params, emis);
    CHECK(std::isfinite(fwd.log_likelihood));
    const ViterbiResult vit = viterbi(params, emis);
    CHECK(std::isfinite(vit.log_score));
    const Posteriors post = posteriors(params, emis);
    CHECK(post.gamma.allFinite());
    const BaumWelchEstimate est = baum_welch_update(post);
    CHECK(est.a.a.allFinite());
    CHECK(est.pi.pi.allFinite());
}
