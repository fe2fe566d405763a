#pragma once

#include "blpv/lpv_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>

namespace blpv {

struct SwarmConfig {
    int n_particles = 30;
    int n_iters = 100;
    double inertia = 0.7;     // in [0, 1]
    double cognitive = 1.5;   // > 0
    double social = 1.5;      // > 0
    double lower_bound = -5.0;
    double upper_bound = 5.0;
    std::uint64_t seed = 0;
};

struct Particle {
    Eigen::VectorXd position;  // flattened coefficient candidate
    Eigen::VectorXd velocity;
    Eigen::VectorXd best_position;
    double best_score;
};

using Objective = std::function<double(const CoeffMatrix&)>;

/// Global-best particle swarm minimization over coefficient matrices of shape
/// (degree+1) x n_taps, constrained to the per-entry bounds box (positions are
/// clamped, velocities limited to the box width). Deterministic for a fixed
/// seed; the global best score never increases across iterations.
/// warm_starts, when given, replace the leading random particles (clamped to
/// the box); the rest of the population is drawn uniformly as usual.
CoeffMatrix pso_search(const Objective& objective, int degree, int n_taps,
                       const SwarmConfig& cfg,
                       std::span<const CoeffMatrix> warm_starts = {});

/// Decoupled initialization objective: each sample independently picks its
/// best grid level, J(H) = sum_k min_j (y(k) - mu_j(k))^2. A cheap proxy for
/// the path-coupled likelihood.
Objective init_objective(const Dataset& data, const SchedulingGrid& grid,
                         int degree, int n_taps);

/// Dwell-aware initialization objective: residuals are scored along the best
/// switching-penalized level assignment,
///   J(H) = min_path sum_k (y(k) - mu_path(k))^2 + tau * #switches,
/// computed by a min-plus recursion over levels. The switch penalty adapts to
/// the candidate itself: tau = switch_penalty * (pointwise-min J / N), so a
/// level change must buy its cost in residual units. Keeps candidates whose
/// implied assignment is step-wise, which is what the chain layer assumes.
Objective dwell_init_objective(const Dataset& data, const SchedulingGrid& grid,
                               int degree, int n_taps, double switch_penalty);

}  // namespace blpv
