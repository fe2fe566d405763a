#pragma once

#include "blpv/lpv_model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace blpv {

/// Row-stochastic transition matrix: entries >= 0, every row sums to one
/// within 1e-12. Entry (i, j) is the probability of moving from state i to j.
struct TransitionMatrix {
    Eigen::MatrixXd a;

    explicit TransitionMatrix(Eigen::MatrixXd m);
    static TransitionMatrix uniform(std::size_t n_states);
    std::size_t size() const noexcept { return static_cast<std::size_t>(a.rows()); }
};

/// Initial state distribution: entries >= 0, summing to one within 1e-12.
struct InitialDist {
    Eigen::VectorXd pi;

    explicit InitialDist(Eigen::VectorXd v);
    static InitialDist uniform(std::size_t n_states);
    std::size_t size() const noexcept { return static_cast<std::size_t>(pi.size()); }
};

struct HmmParams {
    TransitionMatrix a;
    InitialDist pi;
    double sigma2 = 1.0;  // emission noise variance, > 0
};

/// Per-sample, per-state log emission densities, N x M. Entries are finite or
/// -inf; the whole pipeline stays in log space so densities far below the
/// smallest normal double are representable.
struct EmissionTable {
    Eigen::MatrixXd log_b;

    std::size_t n_samples() const noexcept { return static_cast<std::size_t>(log_b.rows()); }
    std::size_t n_states() const noexcept { return static_cast<std::size_t>(log_b.cols()); }
};

/// log N(y(k); mu_j(k), sigma2) for every sample k and grid level j, where
/// mu_j(k) is the model mean output with the scheduling variable pinned at
/// level j.
EmissionTable emission_table(const CoeffMatrix& coeffs, const SchedulingGrid& grid,
                             const Dataset& data, double sigma2);

struct ForwardResult {
    double log_likelihood;
    Eigen::MatrixXd log_alpha;  // N x M
};

/// Log-space forward recursion. log_likelihood is the logsumexp of the final
/// log_alpha row.
ForwardResult log_forward(const HmmParams& params, const EmissionTable& emis);

struct ViterbiResult {
    std::vector<std::size_t> path;  // state indices, length N
    double log_score;               // joint log-probability of the best path
};

/// Most probable state path. Ties resolve to the lowest state index, both at
/// every backpointer and at the final argmax.
ViterbiResult viterbi(const HmmParams& params, const EmissionTable& emis);

struct Posteriors {
    Eigen::MatrixXd gamma;            // N x M, rows sum to 1
    std::vector<Eigen::MatrixXd> xi;  // N-1 slices of M x M, each sums to 1
};

/// Log-space forward-backward smoothing; gamma rows and xi slices are
/// renormalized after exponentiation.
Posteriors posteriors(const HmmParams& params, const EmissionTable& emis);

struct BaumWelchEstimate {
    TransitionMatrix a;
    InitialDist pi;
};

/// M-step for the chain parameters: pi from the first smoothed marginal
/// (floored at 1e-12 and renormalized), transition rows from pairwise
/// posterior sums. A state with zero transition occupancy gets a uniform row.
BaumWelchEstimate baum_welch_update(const Posteriors& post);

/// log(sum(exp(x))) with max shift; -inf for empty or all -inf input.
double logsumexp(const Eigen::VectorXd& x);

}  // namespace blpv
