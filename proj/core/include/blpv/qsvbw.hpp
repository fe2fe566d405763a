#pragma once

#include "blpv/estimation.hpp"
#include "blpv/hmm.hpp"
#include "blpv/lpv_model.hpp"
#include "blpv/pso.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace blpv {

struct QsvbwConfig {
    SchedulingGrid grid;
    int n_taps = 1;
    std::vector<int> degree_candidates;
    int max_iters = 200;
    double loglik_rel_tol = 1e-6;
    int sweeps_per_iter = 1;
    // initial self-transition probability of the chain; encodes the step-wise
    // dwell prior. Off-diagonal mass is spread uniformly. 0 means uniform
    // rows (no dwell prior).
    double init_self_transition = 0.0;
    // switch penalty of the swarm objective, in per-sample residual units;
    // 0 selects the decoupled pointwise objective
    double init_switch_penalty = 0.0;
    // keep coefficient sweeps inside the swarm search box; without this the
    // unconstrained updates can inflate the polynomial coefficients until
    // neighboring levels emit unrelated responses
    bool clamp_coeffs = false;
    // deterministic-annealing rate for the noise variance, in (0, 1); each
    // iteration the variance is floored at rate^t * var(y), so decoding
    // sharpens gradually instead of committing to an early labeling.
    // 0 disables annealing (pure residual re-estimation).
    double sigma2_anneal = 0.0;
    // seed the swarm with coefficient candidates built from local regression
    // responses (segment, order, fit); helps narrowband inputs where random
    // populations practically never land a level-coherent labeling
    bool structured_init = false;
    // Dirichlet pseudo-count mass per transition row, spread over the sticky
    // template, mixed into the Baum-Welch update; keeps rows of rarely
    // visited states from degenerating. 0 keeps the plain update.
    double transition_pseudocount = 0.0;
    SwarmConfig swarm;
    std::uint64_t seed = 0;

    // hold-out protocol used by select_degree
    double cv_train_fraction = 0.7;
    int cv_max_iters = 30;
};

struct QsvbwResult {
    CoeffMatrix coeffs;
    HmmParams hmm;
    std::vector<double> path;          // scheduling values, length N
    std::vector<double> loglik_trace;  // joint log-likelihood after each accepted iteration
    int chosen_degree = 0;
    int iterations_run = 0;
};

using IterationObserver = std::function<void(int iteration, double log_likelihood)>;

/// Polynomial order selection by hold-out validation: a capped fit per
/// candidate on the leading cv_train_fraction of the data, scored by
/// one-step-ahead output BFR on the remainder. Candidates share the swarm
/// seed so scores are directly comparable; ties go to the smaller degree.
int select_degree(const Dataset& data, const QsvbwConfig& cfg);

/// Blind identification of an LPV-FIR model with an unmeasured scheduling
/// variable. Selects the polynomial order when several candidates are given,
/// initializes the chain parameters uniform and the coefficients by particle
/// swarm, then alternates Viterbi decoding of the scheduling path, Baum-Welch
/// re-estimation of the chain, coordinate sweeps of the coefficient matrix
/// and noise re-estimation until the joint log-likelihood stalls. An
/// iteration that lowers the joint log-likelihood is rolled back and ends the
/// run, so the recorded trace is non-decreasing.
QsvbwResult run(const Dataset& data, const QsvbwConfig& cfg,
                const IterationObserver& observer = {});

/// run() with the polynomial order pinned (no selection pass).
QsvbwResult run_fixed_degree(const Dataset& data, const QsvbwConfig& cfg, int degree,
                             const IterationObserver& observer = {});

struct Prediction {
    std::vector<double> y_hat;  // mean output along the decoded path
    std::vector<double> p_hat;  // decoded scheduling values
};

/// Viterbi-decode the scheduling path of a dataset under a fitted model and
/// evaluate the per-sample mean outputs along it.
Prediction decode_and_predict(const CoeffMatrix& coeffs, const SchedulingGrid& grid,
                              const HmmParams& hmm, const Dataset& data);

/// Joint log-density of the outputs and a fixed scheduling state path:
/// log pi(q1) + sum log a(q_{k-1}, q_k) + Gaussian output terms.
double complete_data_log_likelihood(const CoeffMatrix& coeffs, const SchedulingGrid& grid,
                                    const HmmParams& hmm, const Dataset& data,
                                    std::span<const std::size_t> path_states);

/// Builds coefficient warm starts directly from the data. Sliding-window
/// regression responses are segmented by a switching-penalized assignment,
/// the per-segment mean responses (interiors only, window-mixed edges
/// trimmed) are merged down to one point per grid level and chained by the
/// shortest path through them: responses vary smoothly with the scheduling
/// level, so consecutive levels are neighbors. The chain is mapped onto the
/// grid in the orientation giving the smaller coefficient norm, plus one-off
/// shifted mappings as alternatives, and a bounded fit on each implied path
/// yields the candidates. Empty when the construction degenerates.
std::vector<CoeffMatrix> structured_initial_coeffs(const Dataset& data,
                                                   const SchedulingGrid& grid, int degree,
                                                   int n_taps, double lower, double upper);

}  // namespace blpv
