#include "blpv/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace blpv {

FitContext::FitContext(const Dataset& data, std::span<const double> path, int degree, int n_taps)
    : degree_(degree), n_taps_(n_taps) {
    if (degree < 0 || n_taps < 1)
        throw std::invalid_argument("FitContext: degree must be >= 0 and n_taps >= 1");
    if (data.size() == 0 || data.u.size() != data.y.size())
        throw std::invalid_argument("FitContext: dataset must be non-empty with matching u/y");
    if (path.size() != data.size())
        throw std::invalid_argument("FitContext: path length must match dataset length");

    const auto n = static_cast<Eigen::Index>(data.size());
    y_.resize(n);
    basis_.resize(n, degree + 1);
    phi_.resize(n, n_taps);
    for (Eigen::Index k = 0; k < n; ++k) {
        y_(k) = data.y[static_cast<std::size_t>(k)];
        basis_.row(k) = basis_vector(path[static_cast<std::size_t>(k)], degree).transpose();
        phi_.row(k) = regressor(data.u, static_cast<std::size_t>(k) + 1, n_taps).transpose();
    }
    denom_ = basis_.cwiseProduct(basis_).transpose() * phi_.cwiseProduct(phi_);
}

namespace {

// Per-sample means basis(k)' H phi(k) for all k.
Eigen::VectorXd model_means(const CoeffMatrix& coeffs, const FitContext& ctx) {
    return (ctx.basis() * coeffs.entries).cwiseProduct(ctx.phi()).rowwise().sum();
}

void check_shape(const CoeffMatrix& coeffs, const FitContext& ctx) {
    if (coeffs.degree() != ctx.degree() || coeffs.n_taps() != ctx.n_taps())
        throw std::invalid_argument("coefficient matrix shape does not match fit context");
}

}  // namespace

double objective_J(const CoeffMatrix& coeffs, const FitContext& ctx) {
    check_shape(coeffs, ctx);
    return (ctx.y() - model_means(coeffs, ctx)).squaredNorm();
}

EntryUpdate update_entry(const CoeffMatrix& coeffs, int row, int col, const FitContext& ctx) {
    check_shape(coeffs, ctx);
    if (row < 0 || row > ctx.degree() || col < 0 || col >= ctx.n_taps())
        throw std::invalid_argument("update_entry: entry index out of range");

    const double denom = ctx.coordinate_denominators()(row, col);
    if (denom <= 0.0)
        return EntryUpdate{coeffs.entries(row, col), true};

    // eta(k) = basis(k, row) * phi(k, col); the exact coordinate minimizer is
    // the current value shifted by <eta, residual> / <eta, eta>.
    const Eigen::VectorXd residual = ctx.y() - model_means(coeffs, ctx);
    const Eigen::VectorXd eta = ctx.basis().col(row).cwiseProduct(ctx.phi().col(col));
    return EntryUpdate{coeffs.entries(row, col) + eta.dot(residual) / denom, false};
}

namespace {

SweepResult sweep_impl(const CoeffMatrix& coeffs, const FitContext& ctx, int n_sweeps,
                       double lower, double upper) {
    check_shape(coeffs, ctx);
    if (n_sweeps < 1)
        throw std::invalid_argument("sweep_H: n_sweeps must be >= 1");
    const bool boxed = lower > -std::numeric_limits<double>::infinity() ||
                       upper < std::numeric_limits<double>::infinity();
    if (boxed && !(lower < upper))
        throw std::invalid_argument("sweep_H: lower bound must be below upper bound");

    SweepResult res{coeffs, {}, false};
    res.objective_trace.reserve(static_cast<std::size_t>(n_sweeps) *
                                static_cast<std::size_t>((ctx.degree() + 1) * ctx.n_taps()));

    Eigen::VectorXd residual = ctx.y() - model_means(res.coeffs, ctx);
    double j_current = residual.squaredNorm();

    for (int sweep = 0; sweep < n_sweeps; ++sweep) {
        for (int v = 0; v <= ctx.degree(); ++v) {
            for (int w = 0; w < ctx.n_taps(); ++w) {
                const double denom = ctx.coordinate_denominators()(v, w);
                if (denom <= 0.0) {
                    res.any_degenerate = true;
                    res.objective_trace.push_back(j_current);
                    continue;
                }
                const Eigen::VectorXd eta = ctx.basis().col(v).cwiseProduct(ctx.phi().col(w));
                const double num = eta.dot(residual);
                double step = num / denom;
                if (boxed) {
                    // the parabola's boxed minimizer is the clamped vertex
                    const double target =
                        std::clamp(res.coeffs.entries(v, w) + step, lower, upper);
                    step = target - res.coeffs.entries(v, w);
                }
                res.coeffs.entries(v, w) += step;
                residual -= step * eta;
                // quadratic along the coordinate: J changes by step*(step*denom - 2*num)
                j_current += step * (step * denom - 2.0 * num);
                res.objective_trace.push_back(j_current);
            }
        }
    }
    return res;
}

}  // namespace

SweepResult sweep_H(const CoeffMatrix& coeffs, const FitContext& ctx, int n_sweeps) {
    return sweep_impl(coeffs, ctx, n_sweeps, -std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity());
}

SweepResult sweep_H(const CoeffMatrix& coeffs, const FitContext& ctx, int n_sweeps,
                    double lower, double upper) {
    return sweep_impl(coeffs, ctx, n_sweeps, lower, upper);
}

double estimate_sigma2(const CoeffMatrix& coeffs, const FitContext& ctx) {
    const double j = objective_J(coeffs, ctx);
    return std::max(j / static_cast<double>(ctx.n_samples()), 1e-12);
}

}  // namespace blpv
