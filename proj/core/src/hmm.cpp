#include "blpv/hmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace blpv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSimplexTol = 1e-12;

void check_simplex_row(const Eigen::VectorXd& row, const char* what) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        const double v = row(j);
        if (std::isnan(v) || v < 0.0)
            throw std::invalid_argument(std::string(what) + ": entries must be >= 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
        throw std::invalid_argument(std::string(what) + ": row must sum to 1");
}

Eigen::MatrixXd log_of(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : kNegInf; });
}

}  // namespace

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd m) : a(std::move(m)) {
    if (a.rows() < 1 || a.rows() != a.cols())
        throw std::invalid_argument("TransitionMatrix: must be square and non-empty");
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        check_simplex_row(a.row(i), "TransitionMatrix");
}

TransitionMatrix TransitionMatrix::uniform(std::size_t n_states) {
    if (n_states < 1)
        throw std::invalid_argument("TransitionMatrix: need at least one state");
    const auto m = static_cast<Eigen::Index>(n_states);
    return TransitionMatrix(Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(n_states)));
}

InitialDist::InitialDist(Eigen::VectorXd v) : pi(std::move(v)) {
    if (pi.size() < 1)
        throw std::invalid_argument("InitialDist: must be non-empty");
    check_simplex_row(pi, "InitialDist");
}

InitialDist InitialDist::uniform(std::size_t n_states) {
    if (n_states < 1)
        throw std::invalid_argument("InitialDist: need at least one state");
    const auto m = static_cast<Eigen::Index>(n_states);
    return InitialDist(Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(n_states)));
}

double logsumexp(const Eigen::VectorXd& x) {
    if (x.size() == 0) return kNegInf;
    const double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;  // all -inf (or a stray +inf propagates)
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        acc += std::exp(x(i) - m);
    return m + std::log(acc);
}

EmissionTable emission_table(const CoeffMatrix& coeffs, const SchedulingGrid& grid,
                             const Dataset& data, double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw std::invalid_argument("emission_table: sigma2 must be positive and finite");
    if (data.size() == 0 || data.u.size() != data.y.size())
        throw std::invalid_argument("emission_table: dataset must be non-empty with matching u/y");

    const auto n = static_cast<Eigen::Index>(data.size());
    const auto m = static_cast<Eigen::Index>(grid.size());

    // Per-state means: mu(k, j) = basis(p_j)' H phi(k), evaluated for all k, j
    // as Phi * (B H')' with B the per-level basis matrix.
    Eigen::MatrixXd level_basis(m, coeffs.degree() + 1);
    for (Eigen::Index j = 0; j < m; ++j)
        level_basis.row(j) = basis_vector(grid.level(static_cast<std::size_t>(j)), coeffs.degree()).transpose();
    Eigen::MatrixXd gains = level_basis * coeffs.entries;  // M x n_taps

    Eigen::MatrixXd phi(n, coeffs.n_taps());
    for (Eigen::Index k = 0; k < n; ++k)
        phi.row(k) = regressor(data.u, static_cast<std::size_t>(k) + 1, coeffs.n_taps()).transpose();

    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    const double inv_two_sigma2 = 0.5 / sigma2;

    EmissionTable table;
    table.log_b.resize(n, m);
    Eigen::MatrixXd mu = phi * gains.transpose();  // N x M
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double r = data.y[static_cast<std::size_t>(k)] - mu(k, j);
            table.log_b(k, j) = log_norm - r * r * inv_two_sigma2;
        }
    }
    return table;
}

ForwardResult log_forward(const HmmParams& params, const EmissionTable& emis) {
    const auto n = static_cast<Eigen::Index>(emis.n_samples());
    const auto m = static_cast<Eigen::Index>(emis.n_states());
    if (params.a.size() != emis.n_states() || params.pi.size() != emis.n_states())
        throw std::invalid_argument("log_forward: state count mismatch");

    const Eigen::MatrixXd log_a = log_of(params.a.a);
    ForwardResult res;
    res.log_alpha.resize(n, m);

    for (Eigen::Index j = 0; j < m; ++j) {
        const double p = params.pi.pi(j);
        res.log_alpha(0, j) = (p > 0.0 ? std::log(p) : kNegInf) + emis.log_b(0, j);
    }
    Eigen::VectorXd scratch(m);
    for (Eigen::Index k = 1; k < n; ++k) {
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = 0; i < m; ++i)
                scratch(i) = res.log_alpha(k - 1, i) + log_a(i, j);
            res.log_alpha(k, j) = logsumexp(scratch) + emis.log_b(k, j);
        }
    }
    res.log_likelihood = logsumexp(res.log_alpha.row(n - 1));
    return res;
}

ViterbiResult viterbi(const HmmParams& params, const EmissionTable& emis) {
    const auto n = static_cast<Eigen::Index>(emis.n_samples());
    const auto m = static_cast<Eigen::Index>(emis.n_states());
    if (params.a.size() != emis.n_states() || params.pi.size() != emis.n_states())
        throw std::invalid_argument("viterbi: state count mismatch");

    const Eigen::MatrixXd log_a = log_of(params.a.a);
    Eigen::MatrixXd delta(n, m);
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> back(n, m);

    for (Eigen::Index j = 0; j < m; ++j) {
        const double p = params.pi.pi(j);
        delta(0, j) = (p > 0.0 ? std::log(p) : kNegInf) + emis.log_b(0, j);
        back(0, j) = 0;
    }
    for (Eigen::Index k = 1; k < n; ++k) {
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::Index arg = 0;
            double best = delta(k - 1, 0) + log_a(0, j);
            for (Eigen::Index i = 1; i < m; ++i) {
                const double cand = delta(k - 1, i) + log_a(i, j);
                if (cand > best) {  // strict: ties keep the lowest index
                    best = cand;
                    arg = i;
                }
            }
            delta(k, j) = best + emis.log_b(k, j);
            back(k, j) = arg;
        }
    }

    ViterbiResult res;
    res.path.resize(static_cast<std::size_t>(n));
    Eigen::Index last = 0;
    double best = delta(n - 1, 0);
    for (Eigen::Index j = 1; j < m; ++j) {
        if (delta(n - 1, j) > best) {
            best = delta(n - 1, j);
            last = j;
        }
    }
    res.log_score = best;
    res.path[static_cast<std::size_t>(n - 1)] = static_cast<std::size_t>(last);
    for (Eigen::Index k = n - 1; k > 0; --k) {
        last = back(k, last);
        res.path[static_cast<std::size_t>(k - 1)] = static_cast<std::size_t>(last);
    }
    return res;
}

Posteriors posteriors(const HmmParams& params, const EmissionTable& emis) {
    const auto n = static_cast<Eigen::Index>(emis.n_samples());
    const auto m = static_cast<Eigen::Index>(emis.n_states());
    const ForwardResult fwd = log_forward(params, emis);
    const Eigen::MatrixXd log_a = log_of(params.a.a);

    Eigen::MatrixXd log_beta(n, m);
    log_beta.row(n - 1).setZero();
    Eigen::VectorXd scratch(m);
    for (Eigen::Index k = n - 2; k >= 0; --k) {
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j)
                scratch(j) = log_a(i, j) + emis.log_b(k + 1, j) + log_beta(k + 1, j);
            log_beta(k, i) = logsumexp(scratch);
        }
    }

    Posteriors post;
    post.gamma.resize(n, m);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < m; ++j)
            scratch(j) = fwd.log_alpha(k, j) + log_beta(k, j);
        const double norm = logsumexp(scratch);
        if (!std::isfinite(norm)) {
            post.gamma.row(k).setConstant(1.0 / static_cast<double>(m));
            continue;
        }
        for (Eigen::Index j = 0; j < m; ++j)
            post.gamma(k, j) = std::exp(scratch(j) - norm);
        const double row_sum = post.gamma.row(k).sum();
        if (row_sum > 0.0) post.gamma.row(k) /= row_sum;
    }

    post.xi.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
    Eigen::MatrixXd log_slice(m, m);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        double slice_max = kNegInf;
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                log_slice(i, j) = fwd.log_alpha(k, i) + log_a(i, j) + emis.log_b(k + 1, j) +
                                  log_beta(k + 1, j);
                slice_max = std::max(slice_max, log_slice(i, j));
            }
        }
        Eigen::MatrixXd slice(m, m);
        if (!std::isfinite(slice_max)) {
            slice.setConstant(1.0 / static_cast<double>(m * m));
        } else {
            double total = 0.0;
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j < m; ++j) {
                    slice(i, j) = std::exp(log_slice(i, j) - slice_max);
                    total += slice(i, j);
                }
            slice /= total;
        }
        post.xi.push_back(std::move(slice));
    }
    return post;
}

BaumWelchEstimate baum_welch_update(const Posteriors& post) {
    const auto n = post.gamma.rows();
    const auto m = post.gamma.cols();
    if (n < 1 || m < 1)
        throw std::invalid_argument("baum_welch_update: empty posteriors");
    if (post.xi.size() != static_cast<std::size_t>(n - 1))
        throw std::invalid_argument("baum_welch_update: xi slice count must be N-1");

    Eigen::VectorXd pi = post.gamma.row(0).transpose();
    pi = pi.cwiseMax(1e-12);
    pi /= pi.sum();

    Eigen::MatrixXd a(m, m);
    Eigen::MatrixXd xi_sum = Eigen::MatrixXd::Zero(m, m);
    for (const auto& slice : post.xi) xi_sum += slice;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double occupancy = xi_sum.row(i).sum();
        if (occupancy > 0.0) {
            a.row(i) = xi_sum.row(i) / occupancy;
            a.row(i) /= a.row(i).sum();  // guard rounding
        } else {
            a.row(i).setConstant(1.0 / static_cast<double>(m));
        }
    }
    return BaumWelchEstimate{TransitionMatrix(std::move(a)), InitialDist(std::move(pi))};
}

}  // namespace blpv
