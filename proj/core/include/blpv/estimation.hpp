#pragma once

#include "blpv/lpv_model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace blpv {

/// Regression quantities for a dataset with a fixed scheduling path:
/// basis row k is basis_vector(path(k), degree)', regressor row k is
/// regressor(u, k, n_taps)'. Per-entry coordinate denominators
/// sum_k basis(k,v)^2 * phi(k,w)^2 are precomputed.
class FitContext {
public:
    FitContext(const Dataset& data, std::span<const double> path, int degree, int n_taps);

    const Eigen::VectorXd& y() const noexcept { return y_; }
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }
    const Eigen::MatrixXd& phi() const noexcept { return phi_; }
    const Eigen::MatrixXd& coordinate_denominators() const noexcept { return denom_; }
    int degree() const noexcept { return degree_; }
    int n_taps() const noexcept { return n_taps_; }
    Eigen::Index n_samples() const noexcept { return y_.size(); }

private:
    Eigen::VectorXd y_;
    Eigen::MatrixXd basis_;  // N x (degree+1)
    Eigen::MatrixXd phi_;    // N x n_taps
    Eigen::MatrixXd denom_;  // (degree+1) x n_taps
    int degree_;
    int n_taps_;
};

/// Sum of squared output residuals sum_k (y(k) - basis(k)' H phi(k))^2.
double objective_J(const CoeffMatrix& coeffs, const FitContext& ctx);

struct EntryUpdate {
    double value;
    bool degenerate;  // zero denominator: the entry carries no signal and is left unchanged
};

/// Exact minimizer of the objective along entry (row, col) with all other
/// entries held fixed. Writing the returned value back never increases the
/// objective.
EntryUpdate update_entry(const CoeffMatrix& coeffs, int row, int col, const FitContext& ctx);

struct SweepResult {
    CoeffMatrix coeffs;
    std::vector<double> objective_trace;  // J after each single entry update
    bool any_degenerate = false;
};

/// Gauss-Seidel sweeps of update_entry over all entries in row-major order.
/// Sequential by construction; the objective is non-increasing across every
/// single update. When [lower, upper] bounds are given, each coordinate step
/// takes the exact minimizer within the box instead (the objective is still
/// non-increasing), which keeps the fit inside a bounded coefficient class.
SweepResult sweep_H(const CoeffMatrix& coeffs, const FitContext& ctx, int n_sweeps);
SweepResult sweep_H(const CoeffMatrix& coeffs, const FitContext& ctx, int n_sweeps,
                    double lower, double upper);

/// Maximum-likelihood residual variance max(J/N, 1e-12).
double estimate_sigma2(const CoeffMatrix& coeffs, const FitContext& ctx);

}  // namespace blpv
