#include "blpv/pso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace blpv {

namespace {

void validate(const SwarmConfig& cfg) {
    if (cfg.n_particles < 2)
        throw std::invalid_argument("SwarmConfig: need at least two particles");
    if (cfg.n_iters < 0)
        throw std::invalid_argument("SwarmConfig: n_iters must be >= 0");
    if (!(cfg.inertia >= 0.0 && cfg.inertia <= 1.0))
        throw std::invalid_argument("SwarmConfig: inertia must lie in [0, 1]");
    if (!(cfg.cognitive > 0.0) || !(cfg.social > 0.0))
        throw std::invalid_argument("SwarmConfig: cognitive and social weights must be > 0");
    if (!std::isfinite(cfg.lower_bound) || !std::isfinite(cfg.upper_bound) ||
        !(cfg.lower_bound < cfg.upper_bound))
        throw std::invalid_argument("SwarmConfig: bounds must be finite with lower < upper");
}

}  // namespace

CoeffMatrix pso_search(const Objective& objective, int degree, int n_taps,
                       const SwarmConfig& cfg, std::span<const CoeffMatrix> warm_starts) {
    validate(cfg);
    if (!objective)
        throw std::invalid_argument("pso_search: objective must be callable");

    const Eigen::Index dim = static_cast<Eigen::Index>(degree + 1) * n_taps;
    const double width = cfg.upper_bound - cfg.lower_bound;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto as_matrix = [&](const Eigen::VectorXd& x) {
        CoeffMatrix h(degree, n_taps);
        for (Eigen::Index i = 0; i < dim; ++i)
            h.entries(i / n_taps, i % n_taps) = x(i);
        return h;
    };
    auto evaluate = [&](const Eigen::VectorXd& x) {
        const double score = objective(as_matrix(x));
        return std::isnan(score) ? std::numeric_limits<double>::infinity() : score;
    };

    std::vector<Particle> swarm(static_cast<std::size_t>(cfg.n_particles));
    Eigen::VectorXd global_best;
    double global_best_score = std::numeric_limits<double>::infinity();

    std::size_t next_warm = 0;
    for (auto& particle : swarm) {
        particle.position.resize(dim);
        if (next_warm < warm_starts.size()) {
            const CoeffMatrix& warm = warm_starts[next_warm++];
            if (warm.degree() != degree || warm.n_taps() != n_taps)
                throw std::invalid_argument("pso_search: warm start shape mismatch");
            for (Eigen::Index i = 0; i < dim; ++i)
                particle.position(i) = std::clamp(warm.entries(i / n_taps, i % n_taps),
                                                  cfg.lower_bound, cfg.upper_bound);
        } else {
            for (Eigen::Index i = 0; i < dim; ++i)
                particle.position(i) = cfg.lower_bound + width * unit(rng);
        }
        particle.velocity = Eigen::VectorXd::Zero(dim);
        particle.best_position = particle.position;
        particle.best_score = evaluate(particle.position);
        if (particle.best_score < global_best_score) {
            global_best_score = particle.best_score;
            global_best = particle.best_position;
        }
    }

    for (int iter = 0; iter < cfg.n_iters; ++iter) {
        for (auto& particle : swarm) {
            for (Eigen::Index i = 0; i < dim; ++i) {
                const double r1 = unit(rng);
                const double r2 = unit(rng);
                double v = cfg.inertia * particle.velocity(i) +
                           cfg.cognitive * r1 * (particle.best_position(i) - particle.position(i)) +
                           cfg.social * r2 * (global_best(i) - particle.position(i));
                v = std::clamp(v, -width, width);
                particle.velocity(i) = v;
                particle.position(i) =
                    std::clamp(particle.position(i) + v, cfg.lower_bound, cfg.upper_bound);
            }
            const double score = evaluate(particle.position);
            if (score < particle.best_score) {
                particle.best_score = score;
                particle.best_position = particle.position;
            }
            if (score < global_best_score) {
                global_best_score = score;
                global_best = particle.position;
            }
        }
    }
    return as_matrix(global_best);
}

Objective init_objective(const Dataset& data, const SchedulingGrid& grid,
                         int degree, int n_taps) {
    if (data.size() == 0 || data.u.size() != data.y.size())
        throw std::invalid_argument("init_objective: dataset must be non-empty with matching u/y");

    const auto n = static_cast<Eigen::Index>(data.size());
    const auto m = static_cast<Eigen::Index>(grid.size());

    Eigen::MatrixXd level_basis(m, degree + 1);
    for (Eigen::Index j = 0; j < m; ++j)
        level_basis.row(j) = basis_vector(grid.level(static_cast<std::size_t>(j)), degree).transpose();

    Eigen::MatrixXd phi(n, n_taps);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        phi.row(k) = regressor(data.u, static_cast<std::size_t>(k) + 1, n_taps).transpose();
        y(k) = data.y[static_cast<std::size_t>(k)];
    }

    return [level_basis, phi, y, degree, n_taps](const CoeffMatrix& coeffs) {
        if (coeffs.degree() != degree || coeffs.n_taps() != n_taps)
            throw std::invalid_argument("init objective: coefficient shape mismatch");
        const Eigen::MatrixXd mu = phi * (level_basis * coeffs.entries).transpose();  // N x M
        return (mu.colwise() - y).cwiseAbs2().rowwise().minCoeff().sum();
    };
}

Objective dwell_init_objective(const Dataset& data, const SchedulingGrid& grid,
                               int degree, int n_taps, double switch_penalty) {
    if (!(switch_penalty > 0.0) || !std::isfinite(switch_penalty))
        throw std::invalid_argument("dwell_init_objective: switch_penalty must be positive");
    if (data.size() == 0 || data.u.size() != data.y.size())
        throw std::invalid_argument("dwell_init_objective: dataset must be non-empty with matching u/y");

    const auto n = static_cast<Eigen::Index>(data.size());
    const auto m = static_cast<Eigen::Index>(grid.size());

    Eigen::MatrixXd level_basis(m, degree + 1);
    for (Eigen::Index j = 0; j < m; ++j)
        level_basis.row(j) = basis_vector(grid.level(static_cast<std::size_t>(j)), degree).transpose();

    Eigen::MatrixXd phi(n, n_taps);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        phi.row(k) = regressor(data.u, static_cast<std::size_t>(k) + 1, n_taps).transpose();
        y(k) = data.y[static_cast<std::size_t>(k)];
    }

    return [level_basis, phi, y, degree, n_taps, switch_penalty](const CoeffMatrix& coeffs) {
        if (coeffs.degree() != degree || coeffs.n_taps() != n_taps)
            throw std::invalid_argument("init objective: coefficient shape mismatch");
        const Eigen::Index n_loc = y.size();
        const Eigen::Index m_loc = level_basis.rows();
        const Eigen::MatrixXd mu = phi * (level_basis * coeffs.entries).transpose();  // N x M
        const Eigen::MatrixXd sq = (mu.colwise() - y).cwiseAbs2();

        const double pointwise = sq.rowwise().minCoeff().sum();
        const double tau = switch_penalty * pointwise / static_cast<double>(n_loc);
        if (tau <= 0.0) return pointwise;

        // min-plus recursion: stay on the level or jump from the cheapest one
        Eigen::VectorXd cost = sq.row(0).transpose();
        Eigen::VectorXd next(m_loc);
        for (Eigen::Index k = 1; k < n_loc; ++k) {
            const double jump = cost.minCoeff() + tau;
            for (Eigen::Index j = 0; j < m_loc; ++j)
                next(j) = sq(k, j) + std::min(cost(j), jump);
            cost.swap(next);
        }
        return cost.minCoeff();
    };
}

}  // namespace blpv
