#include <blpv/pso.hpp>

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace blpv;

TEST_CASE("swarm config validation") {
    SwarmConfig cfg;
    cfg.n_particles = 1;
    CHECK_THROWS_AS(pso_search([](const CoeffMatrix&) { return 0.0; }, 1, 1, cfg),
                    std::invalid_argument);
    cfg = SwarmConfig{};
    cfg.lower_bound = 2.0;
    cfg.upper_bound = -2.0;
    CHECK_THROWS_AS(pso_search([](const CoeffMatrix&) { return 0.0; }, 1, 1, cfg),
                    std::invalid_argument);
}

TEST_CASE("convex bowl lands on the optimum") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> within(-3.0, 3.0);
    Eigen::MatrixXd target(3, 2);
    for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = within(rng);

    SwarmConfig cfg;
    cfg.seed = 9;
    const CoeffMatrix best = pso_search(
        [&](const CoeffMatrix& h) { return (h.entries - target).squaredNorm(); }, 2, 2, cfg);
    CHECK((best.entries - target).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("zero iterations return the best of the initial population") {
    std::vector<std::pair<Eigen::MatrixXd, double>> evaluated;
    auto recording = [&](const CoeffMatrix& h) {
        const double score = (h.entries.array() - 0.5).square().sum();
        evaluated.emplace_back(h.entries, score);
        return score;
    };
    SwarmConfig cfg;
    cfg.n_iters = 0;
    cfg.seed = 4;
    const CoeffMatrix best = pso_search(recording, 1, 3, cfg);
    REQUIRE(evaluated.size() == static_cast<std::size_t>(cfg.n_particles));
    double min_score = evaluated.front().second;
    Eigen::MatrixXd argmin = evaluated.front().first;
    for (const auto& [h, s] : evaluated)
        if (s < min_score) {
            min_score = s;
            argmin = h;
        }
    CHECK(best.entries.cwiseEqual(argmin).all());
}

TEST_CASE("fixed seed reproduces the trajectory bitwise") {
    auto objective = [](const CoeffMatrix& h) { return (h.entries.array() - 1.0).square().sum(); };
    SwarmConfig cfg;
    cfg.n_iters = 40;
    cfg.seed = 123;
    const CoeffMatrix a = pso_search(objective, 2, 3, cfg);
    const CoeffMatrix b = pso_search(objective, 2, 3, cfg);
    CHECK(a.entries.cwiseEqual(b.entries).all());
    cfg.seed = 124;
    CHECK_FALSE(pso_search(objective, 2, 3, cfg).entries.cwiseEqual(a.entries).all());
}

TEST_CASE("global best never worsens as iterations grow") {
    auto objective = [](const CoeffMatrix& h) {
        // a rippled bowl, to give the swarm something non-trivial
        return h.entries.squaredNorm() + 0.3 * std::sin(5.0 * h.entries.sum());
    };
    SwarmConfig cfg;
    cfg.seed = 31;
    double last = std::numeric_limits<double>::infinity();
    for (int iters : {0, 5, 10, 25, 60}) {
        cfg.n_iters = iters;
        const double score = objective(pso_search(objective, 1, 2, cfg));
        CHECK(score <= last + 1e-15);
        last = score;
    }
}

TEST_CASE("positions respect the bounds box") {
    SwarmConfig cfg;
    cfg.lower_bound = -0.75;
    cfg.upper_bound = 0.5;
    cfg.n_iters = 30;
    cfg.seed = 8;
    bool in_bounds = true;
    auto checked = [&](const CoeffMatrix& h) {
        in_bounds = in_bounds && (h.entries.array() >= cfg.lower_bound).all() &&
                    (h.entries.array() <= cfg.upper_bound).all();
        return (h.entries.array() - 2.0).square().sum();  // optimum outside the box
    };
    const CoeffMatrix best = pso_search(checked, 2, 2, cfg);
    CHECK(in_bounds);
    CHECK((best.entries.array() <= cfg.upper_bound).all());
    CHECK((best.entries.array() >= cfg.lower_bound).all());
    // the box is active: the best sits on the upper face
    CHECK(best.entries.maxCoeff() == doctest::Approx(cfg.upper_bound));
}

TEST_CASE("initialization objective") {
    const SchedulingGrid grid({0.2, 0.5, 0.9});
    CoeffMatrix truth(1, 2);
    truth.entries << 1.2, -0.7, 0.4, 0.9;

    std::mt19937_64 rng(77);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, 2);

    std::vector<double> u(40), p(40);
    for (std::size_t k = 0; k < u.size(); ++k) {
        u[k] = gauss(rng);
        p[k] = grid.level(pick(rng));
    }
    const Dataset data = simulate(LpvFirModel{truth, grid, 0.0}, u, p, 5);
    const Objective objective = init_objective(data, grid, 1, 2);

    SUBCASE("the generating matrix scores zero on noise-free data") {
        CHECK(objective(truth) <= 1e-20);
    }
    SUBCASE("the zero matrix scores the output power") {
        double expect = 0.0;
        for (double v : data.y) expect += v * v;
        CHECK(objective(CoeffMatrix(1, 2)) == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("random matrices match brute-force per-sample minimization") {
        for (int trial = 0; trial < 50; ++trial) {
            CoeffMatrix h(1, 2);
            for (Eigen::Index i = 0; i < h.entries.size(); ++i) h.entries(i) = gauss(rng);
            double expect = 0.0;
            for (std::size_t k = 1; k <= data.size(); ++k) {
                const Eigen::VectorXd phi = regressor(data.u, k, 2);
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < grid.size(); ++j) {
                    const double r = data.y[k - 1] - mean_output(h, grid.level(j), phi);
                    best = std::min(best, r * r);
                }
                expect += best;
            }
            CHECK(objective(h) == doctest::Approx(expect).epsilon(1e-11));
        }
    }
}
