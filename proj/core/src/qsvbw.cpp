#include "blpv/qsvbw.hpp"

#include "blpv/evalio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace blpv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

TransitionMatrix initial_transitions(std::size_t m, double self_transition) {
    if (self_transition <= 0.0 || m < 2) return TransitionMatrix::uniform(m);
    if (self_transition >= 1.0)
        throw std::invalid_argument("QsvbwConfig: init_self_transition must be < 1");
    const auto mm = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd a = Eigen::MatrixXd::Constant(
        mm, mm, (1.0 - self_transition) / static_cast<double>(m - 1));
    a.diagonal().setConstant(self_transition);
    for (Eigen::Index i = 0; i < mm; ++i) a.row(i) /= a.row(i).sum();
    return TransitionMatrix(std::move(a));
}

void validate(const Dataset& data, const QsvbwConfig& cfg) {
    if (cfg.n_taps < 1)
        throw std::invalid_argument("QsvbwConfig: n_taps must be >= 1");
    if (cfg.max_iters < 1)
        throw std::invalid_argument("QsvbwConfig: max_iters must be >= 1");
    if (!(cfg.loglik_rel_tol > 0.0))
        throw std::invalid_argument("QsvbwConfig: loglik_rel_tol must be > 0");
    if (cfg.sweeps_per_iter < 1)
        throw std::invalid_argument("QsvbwConfig: sweeps_per_iter must be >= 1");
    if (data.size() < static_cast<std::size_t>(cfg.n_taps))
        throw std::invalid_argument("qsvbw: dataset shorter than the FIR window");
    if (data.u.size() != data.y.size())
        throw std::invalid_argument("qsvbw: u and y must have the same length");
    bool excited = false;
    for (double v : data.u)
        if (v != 0.0) { excited = true; break; }
    if (!excited)
        throw std::invalid_argument("qsvbw: model unidentifiable, input is identically zero");
}

double sample_variance(const std::vector<double>& y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    return var / static_cast<double>(y.size());
}

std::vector<double> path_values_of(const SchedulingGrid& grid,
                                   const std::vector<std::size_t>& states) {
    std::vector<double> values(states.size());
    for (std::size_t k = 0; k < states.size(); ++k)
        values[k] = grid.level(states[k]);
    return values;
}

}  // namespace

double complete_data_log_likelihood(const CoeffMatrix& coeffs, const SchedulingGrid& grid,
                                    const HmmParams& hmm, const Dataset& data,
                                    std::span<const std::size_t> path_states) {
    if (path_states.size() != data.size())
        throw std::invalid_argument("complete_data_log_likelihood: path length mismatch");
    if (!(hmm.sigma2 > 0.0))
        throw std::invalid_argument("complete_data_log_likelihood: sigma2 must be > 0");

    auto safe_log = [](double v) { return v > 0.0 ? std::log(v) : kNegInf; };

    Eigen::MatrixXd level_basis(grid.size(), coeffs.degree() + 1);
    for (std::size_t j = 0; j < grid.size(); ++j)
        level_basis.row(static_cast<Eigen::Index>(j)) =
            basis_vector(grid.level(j), coeffs.degree()).transpose();
    const Eigen::MatrixXd gains = level_basis * coeffs.entries;  // M x n_taps

    double loglik = safe_log(hmm.pi.pi(static_cast<Eigen::Index>(path_states[0])));
    for (std::size_t k = 1; k < path_states.size(); ++k)
        loglik += safe_log(hmm.a.a(static_cast<Eigen::Index>(path_states[k - 1]),
                                   static_cast<Eigen::Index>(path_states[k])));

    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * hmm.sigma2);
    const double inv_two_sigma2 = 0.5 / hmm.sigma2;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const Eigen::VectorXd phi = regressor(data.u, k + 1, coeffs.n_taps());
        const double mu = gains.row(static_cast<Eigen::Index>(path_states[k])).dot(phi);
        const double r = data.y[k] - mu;
        loglik += log_norm - r * r * inv_two_sigma2;
    }
    return loglik;
}

namespace {

// shortest Hamiltonian path through the cluster centers; exact bitmask DP up
// to 14 nodes, greedy nearest-neighbor beyond
std::vector<std::size_t> shortest_chain(const Eigen::MatrixXd& dist) {
    const std::size_t m = static_cast<std::size_t>(dist.rows());
    if (m <= 14) {
        const std::size_t full = (std::size_t{1} << m);
        std::vector<std::vector<double>> best(full, std::vector<double>(m, 1e300));
        std::vector<std::vector<int>> from(full, std::vector<int>(m, -1));
        for (std::size_t i = 0; i < m; ++i) best[std::size_t{1} << i][i] = 0.0;
        for (std::size_t mask = 1; mask < full; ++mask) {
            for (std::size_t last = 0; last < m; ++last) {
                if (!(mask & (std::size_t{1} << last)) || best[mask][last] >= 1e300) continue;
                for (std::size_t next = 0; next < m; ++next) {
                    if (mask & (std::size_t{1} << next)) continue;
                    const std::size_t nmask = mask | (std::size_t{1} << next);
                    const double cand = best[mask][last] + dist(static_cast<Eigen::Index>(last),
                                                                static_cast<Eigen::Index>(next));
                    if (cand < best[nmask][next]) {
                        best[nmask][next] = cand;
                        from[nmask][next] = static_cast<int>(last);
                    }
                }
            }
        }
        std::size_t end = 0;
        for (std::size_t i = 1; i < m; ++i)
            if (best[full - 1][i] < best[full - 1][end]) end = i;
        std::vector<std::size_t> chain(m);
        std::size_t mask = full - 1;
        for (std::size_t pos = m; pos-- > 0;) {
            chain[pos] = end;
            const int prev = from[mask][end];
            mask &= ~(std::size_t{1} << end);
            if (prev < 0) break;
            end = static_cast<std::size_t>(prev);
        }
        return chain;
    }
    std::vector<std::size_t> chain;
    std::vector<bool> used(m, false);
    std::size_t cur = 0;
    chain.push_back(cur);
    used[cur] = true;
    while (chain.size() < m) {
        double best = 1e300;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j]) continue;
            const double d = dist(static_cast<Eigen::Index>(cur), static_cast<Eigen::Index>(j));
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        chain.push_back(arg);
        used[arg] = true;
        cur = arg;
    }
    return chain;
}

CoeffMatrix fit_on_path(const Dataset& data, const std::vector<double>& path, int degree,
                        int n_taps, double lower, double upper) {
    const FitContext ctx(data, path, degree, n_taps);
    CoeffMatrix coeffs(degree, n_taps);
    for (int round = 0; round < 40; ++round) {
        const SweepResult res = sweep_H(coeffs, ctx, 10, lower, upper);
        const double shift = (res.coeffs.entries - coeffs.entries).cwiseAbs().maxCoeff();
        coeffs = res.coeffs;
        if (shift < 1e-10) break;
    }
    return coeffs;
}

}  // namespace

std::vector<CoeffMatrix> structured_initial_coeffs(const Dataset& data,
                                                   const SchedulingGrid& grid, int degree,
                                                   int n_taps, double lower, double upper) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto m = static_cast<Eigen::Index>(grid.size());
    const int window = std::max(8, 2 * n_taps + 2);
    if (n < 2 * window || !(lower < upper)) return {};

    // local regression responses on centered windows (ridge keeps the
    // narrowband case well defined: the response is the minimum-norm local
    // gain vector)
    Eigen::MatrixXd phi(n, n_taps);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        phi.row(k) = regressor(data.u, static_cast<std::size_t>(k) + 1, n_taps).transpose();
        y(k) = data.y[static_cast<std::size_t>(k)];
    }
    Eigen::MatrixXd responses(n, n_taps);
    const int half = window / 2;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index first = std::max<Eigen::Index>(0, k - half);
        const Eigen::Index last = std::min<Eigen::Index>(n - 1, first + window - 1);
        const Eigen::Index len = last - first + 1;
        const Eigen::MatrixXd block = phi.middleRows(first, len);
        Eigen::MatrixXd gram = block.transpose() * block;
        const double ridge = 1e-6 * std::max(gram.trace() / n_taps, 1e-12);
        gram.diagonal().array() += ridge;
        responses.row(k) =
            gram.ldlt().solve(block.transpose() * y.segment(first, len)).transpose();
    }
    if (!responses.allFinite()) return {};

    // noise level of the response sequence, from robust successive differences
    std::vector<double> diffs(static_cast<std::size_t>(n - 1));
    for (Eigen::Index k = 0; k + 1 < n; ++k)
        diffs[static_cast<std::size_t>(k)] =
            (responses.row(k + 1) - responses.row(k)).squaredNorm();
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2),
                     diffs.end());
    const double noise2 = std::max(diffs[diffs.size() / 2] / 2.0, 1e-300);

    // optimal piecewise-constant segmentation of the response sequence:
    // within-segment scatter plus a per-segment penalty, solved exactly
    const double penalty = 4.0 * noise2 * std::log(static_cast<double>(n));
    const Eigen::Index min_len = 5;
    const Eigen::Index max_len = 120;
    Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(n + 1, n_taps);
    Eigen::VectorXd prefix_sq = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index k = 0; k < n; ++k) {
        prefix.row(k + 1) = prefix.row(k) + responses.row(k);
        prefix_sq(k + 1) = prefix_sq(k) + responses.row(k).squaredNorm();
    }
    auto scatter = [&](Eigen::Index a, Eigen::Index b) {  // samples [a, b]
        const double len = static_cast<double>(b - a + 1);
        return prefix_sq(b + 1) - prefix_sq(a) -
               (prefix.row(b + 1) - prefix.row(a)).squaredNorm() / len;
    };
    std::vector<double> best_cost(static_cast<std::size_t>(n) + 1, 1e300);
    std::vector<Eigen::Index> cut_before(static_cast<std::size_t>(n) + 1, 0);
    best_cost[0] = 0.0;
    for (Eigen::Index j = 1; j <= n; ++j) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, j - max_len);
        for (Eigen::Index a = lo; a < j; ++a) {
            if (j - a < min_len && a != 0) continue;  // only the head may run short
            const double cand =
                best_cost[static_cast<std::size_t>(a)] + scatter(a, j - 1) + penalty;
            if (cand < best_cost[static_cast<std::size_t>(j)]) {
                best_cost[static_cast<std::size_t>(j)] = cand;
                cut_before[static_cast<std::size_t>(j)] = a;
            }
        }
    }

    // segment means over interiors only: windows near a boundary blend the
    // neighboring level's samples
    struct Segment {
        Eigen::Index first, last;
        Eigen::RowVectorXd mean;
    };
    std::vector<Segment> segments;
    {
        std::vector<Eigen::Index> cuts;
        for (Eigen::Index j = n; j > 0; j = cut_before[static_cast<std::size_t>(j)])
            cuts.push_back(j);
        cuts.push_back(0);
        std::reverse(cuts.begin(), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const Eigen::Index first = cuts[c], last = cuts[c + 1] - 1;
            // trim boundary-mixed windows; also skip windows touching the
            // start, where truncated regressors put responses off-basis
            Eigen::Index in_lo = std::max<Eigen::Index>(first + half, window);
            Eigen::Index in_hi = last - half;
            if (in_hi < in_lo) {
                in_lo = std::max<Eigen::Index>(first, std::min<Eigen::Index>(window, last));
                in_hi = last;
            }
            segments.push_back(Segment{
                first, last, responses.middleRows(in_lo, in_hi - in_lo + 1).colwise().mean()});
        }
    }
    if (segments.size() < 2) return {};

    // one response point per grid level: merge the closest segment means
    // until at most M remain (repeat visits of a level collapse together)
    std::vector<Eigen::RowVectorXd> points;
    std::vector<std::vector<std::size_t>> members;  // segment indices per point
    for (std::size_t s = 0; s < segments.size(); ++s) {
        points.push_back(segments[s].mean);
        members.push_back({s});
    }
    while (points.size() > static_cast<std::size_t>(m)) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < points.size(); ++i)
            for (std::size_t j = i + 1; j < points.size(); ++j) {
                const double d = (points[i] - points[j]).squaredNorm();
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        const double wi = static_cast<double>(members[bi].size());
        const double wj = static_cast<double>(members[bj].size());
        points[bi] = (wi * points[bi] + wj * points[bj]) / (wi + wj);
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        points.erase(points.begin() + static_cast<std::ptrdiff_t>(bj));
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    const std::size_t n_points = points.size();

    // order the level responses along their curve; consecutive grid levels
    // respond most alike, so the shortest chain recovers the level order
    Eigen::MatrixXd dist(n_points, n_points);
    for (std::size_t i = 0; i < n_points; ++i)
        for (std::size_t j = 0; j < n_points; ++j)
            dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (points[i] - points[j]).norm();
    const std::vector<std::size_t> chain = shortest_chain(dist);
    std::vector<std::size_t> position(n_points, 0);
    for (std::size_t pos = 0; pos < chain.size(); ++pos) position[chain[pos]] = pos;

    // per-segment chain position, spread over the grid when levels are missing
    std::vector<std::size_t> segment_position(segments.size(), 0);
    for (std::size_t pt = 0; pt < n_points; ++pt)
        for (std::size_t s : members[pt]) segment_position[s] = position[pt];

    // rank->grid assignment variants: the straight map, adjacent
    // transpositions (the response curve flattens in places, so neighboring
    // levels can swap in the chain) and one-off shifts. The fit residual
    // picks between them: a wrong assignment kinks the per-tap polynomials.
    std::vector<std::vector<long>> rank_maps;
    {
        std::vector<long> base(n_points);
        for (std::size_t pos = 0; pos < n_points; ++pos)
            base[pos] = std::lround(static_cast<double>(pos) * static_cast<double>(m - 1) /
                                    static_cast<double>(n_points - 1));
        rank_maps.push_back(base);
        for (std::size_t t = 0; t + 1 < n_points; ++t) {
            auto variant = base;
            std::swap(variant[t], variant[t + 1]);
            rank_maps.push_back(std::move(variant));
        }
        for (const long shift : {1L, -1L}) {
            auto variant = base;
            for (long& idx : variant) idx += shift;
            rank_maps.push_back(std::move(variant));
        }
    }

    auto path_for = [&](const std::vector<long>& rank_map, bool flip) {
        std::vector<double> path(static_cast<std::size_t>(n));
        std::size_t seg = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            while (seg + 1 < segments.size() && k > segments[seg].last) ++seg;
            long idx = rank_map[segment_position[seg]];
            if (flip) idx = static_cast<long>(m) - 1 - idx;
            idx = std::clamp<long>(idx, 0, static_cast<long>(m) - 1);
            path[static_cast<std::size_t>(k)] = grid.level(static_cast<std::size_t>(idx));
        }
        return path;
    };

    struct Scored {
        CoeffMatrix coeffs;
        double residual;
    };
    // fit the assignment, then let whole segments jump to their best-fitting
    // level and refit until stable; segment-scale moves escape the one-off
    // misalignments that per-sample decoding cannot
    auto try_fit = [&](const std::vector<long>& rank_map, bool flip) -> std::optional<Scored> {
        try {
            std::vector<double> path = path_for(rank_map, flip);
            CoeffMatrix fit = fit_on_path(data, path, degree, n_taps, lower, upper);
            double j = objective_J(fit, FitContext(data, path, degree, n_taps));
            for (int round = 0; round < 6; ++round) {
                Eigen::MatrixXd level_basis(m, degree + 1);
                for (Eigen::Index l = 0; l < m; ++l)
                    level_basis.row(l) =
                        basis_vector(grid.level(static_cast<std::size_t>(l)), degree).transpose();
                const Eigen::MatrixXd mu = phi * (level_basis * fit.entries).transpose();  // N x M
                bool changed = false;
                for (const Segment& seg : segments) {
                    Eigen::Index best_level = 0;
                    double best_cost = std::numeric_limits<double>::infinity();
                    for (Eigen::Index l = 0; l < m; ++l) {
                        double cost_l = 0.0;
                        for (Eigen::Index k = seg.first; k <= seg.last; ++k) {
                            const double r = y(k) - mu(k, l);
                            cost_l += r * r;
                        }
                        if (cost_l < best_cost) {
                            best_cost = cost_l;
                            best_level = l;
                        }
                    }
                    const double level = grid.level(static_cast<std::size_t>(best_level));
                    if (path[static_cast<std::size_t>(seg.first)] != level) changed = true;
                    for (Eigen::Index k = seg.first; k <= seg.last; ++k)
                        path[static_cast<std::size_t>(k)] = level;
                }
                if (!changed && round > 0) break;
                fit = fit_on_path(data, path, degree, n_taps, lower, upper);
                j = objective_J(fit, FitContext(data, path, degree, n_taps));
            }
            return Scored{std::move(fit), j};
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };

    // orientation is a pure gauge (both fit identically); report the tamer one
    bool flip = false;
    {
        const auto forward = try_fit(rank_maps.front(), false);
        const auto backward = try_fit(rank_maps.front(), true);
        if (!forward && !backward) return {};
        if (!forward) flip = true;
        else if (backward && backward->coeffs.entries.norm() < forward->coeffs.entries.norm())
            flip = true;
    }

    std::vector<Scored> scored;
    for (const auto& rank_map : rank_maps)
        if (auto fit = try_fit(rank_map, flip)) scored.push_back(std::move(*fit));
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.residual < b.residual; });
    if (scored.size() > 3) scored.erase(scored.begin() + 3, scored.end());

    std::vector<CoeffMatrix> candidates;
    for (auto& fit : scored) candidates.push_back(std::move(fit.coeffs));
    return candidates;
}

Prediction decode_and_predict(const CoeffMatrix& coeffs, const SchedulingGrid& grid,
                              const HmmParams& hmm, const Dataset& data) {
    const EmissionTable emis = emission_table(coeffs, grid, data, hmm.sigma2);
    const ViterbiResult vit = viterbi(hmm, emis);

    Prediction pred;
    pred.p_hat = path_values_of(grid, vit.path);
    pred.y_hat.resize(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        const Eigen::VectorXd phi = regressor(data.u, k + 1, coeffs.n_taps());
        pred.y_hat[k] = mean_output(coeffs, pred.p_hat[k], phi);
    }
    return pred;
}

namespace {

// one full alternation from a given coefficient start
QsvbwResult alternate_from(CoeffMatrix coeffs, const Dataset& data, const QsvbwConfig& cfg,
                           int degree, const IterationObserver& observer) {
    const std::size_t m = cfg.grid.size();
    TransitionMatrix a = initial_transitions(m, cfg.init_self_transition);
    InitialDist pi = InitialDist::uniform(m);
    const double sigma2_init = std::max(sample_variance(data.y), 1e-12);
    double sigma2 = sigma2_init;
    double anneal_floor = cfg.sigma2_anneal > 0.0 ? sigma2_init : 0.0;

    std::vector<std::size_t> path_states;
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(cfg.max_iters));

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const HmmParams params{a, pi, sigma2};
        const EmissionTable emis = emission_table(coeffs, cfg.grid, data, sigma2);

        // (C) most probable scheduling path under the current parameters
        const ViterbiResult vit = viterbi(params, emis);
        const std::vector<double> values = path_values_of(cfg.grid, vit.path);

        // (D) chain update from smoothed posteriors, coefficient sweep along
        // the decoded path, then noise re-estimation
        const Posteriors post = posteriors(params, emis);
        BaumWelchEstimate bw = baum_welch_update(post);
        if (cfg.transition_pseudocount > 0.0) {
            // maximum-a-posteriori flavor: blend the expected transition
            // counts with a sticky Dirichlet prior before normalizing
            const TransitionMatrix prior = initial_transitions(m, cfg.init_self_transition);
            Eigen::MatrixXd counts = cfg.transition_pseudocount * prior.a;
            for (const auto& slice : post.xi) counts += slice;
            Eigen::MatrixXd smoothed(m, m);
            for (Eigen::Index i = 0; i < smoothed.rows(); ++i)
                smoothed.row(i) = counts.row(i) / counts.row(i).sum();
            bw.a = TransitionMatrix(std::move(smoothed));
        }

        const FitContext ctx(data, values, degree, cfg.n_taps);
        SweepResult sw = cfg.clamp_coeffs
                             ? sweep_H(coeffs, ctx, cfg.sweeps_per_iter,
                                       cfg.swarm.lower_bound, cfg.swarm.upper_bound)
                             : sweep_H(coeffs, ctx, cfg.sweeps_per_iter);
        double sigma2_new = estimate_sigma2(sw.coeffs, ctx);
        bool annealing = false;
        if (anneal_floor > 0.0) {
            anneal_floor *= cfg.sigma2_anneal;
            if (sigma2_new < anneal_floor) {
                sigma2_new = anneal_floor;
                annealing = true;
            } else {
                anneal_floor = 0.0;  // the ML estimate has taken over
            }
        }

        const double loglik = complete_data_log_likelihood(
            sw.coeffs, cfg.grid, HmmParams{bw.a, bw.pi, sigma2_new}, data, vit.path);

        // (E) once the variance schedule has settled, a step that lowers the
        // joint log-likelihood is rolled back and ends the run, so the
        // recorded trace stays non-decreasing
        if (!annealing && !trace.empty() && loglik < trace.back())
            break;

        coeffs = std::move(sw.coeffs);
        a = std::move(bw.a);
        pi = std::move(bw.pi);
        sigma2 = sigma2_new;
        path_states = vit.path;
        trace.push_back(loglik);
        if (observer) observer(iter, loglik);

        if (!annealing && trace.size() >= 2) {
            const double prev = trace[trace.size() - 2];
            const double rel = (loglik - prev) / std::max(1.0, std::abs(prev));
            if (rel < cfg.loglik_rel_tol) break;
        }
    }

    QsvbwResult res{std::move(coeffs), HmmParams{std::move(a), std::move(pi), sigma2},
                    path_values_of(cfg.grid, path_states), std::move(trace), degree,
                    0};
    res.iterations_run = static_cast<int>(res.loglik_trace.size());
    return res;
}

}  // namespace

QsvbwResult run_fixed_degree(const Dataset& data, const QsvbwConfig& cfg, int degree,
                             const IterationObserver& observer) {
    validate(data, cfg);
    if (degree < 0)
        throw std::invalid_argument("qsvbw: degree must be >= 0");

    // (B) initial coefficient candidates: data-driven warm starts (optional)
    // and the swarm search seeded with them; every start runs the full
    // alternation and the highest final joint log-likelihood wins
    const Objective objective =
        cfg.init_switch_penalty > 0.0
            ? dwell_init_objective(data, cfg.grid, degree, cfg.n_taps, cfg.init_switch_penalty)
            : init_objective(data, cfg.grid, degree, cfg.n_taps);
    std::vector<CoeffMatrix> starts;
    if (cfg.structured_init)
        starts = structured_initial_coeffs(data, cfg.grid, degree, cfg.n_taps,
                                           cfg.swarm.lower_bound, cfg.swarm.upper_bound);
    starts.push_back(pso_search(objective, degree, cfg.n_taps, cfg.swarm, starts));

    std::optional<QsvbwResult> best;
    for (const CoeffMatrix& start : starts) {
        QsvbwResult res = alternate_from(start, data, cfg, degree, observer);
        if (res.loglik_trace.empty()) continue;
        if (!best || res.loglik_trace.back() > best->loglik_trace.back()) best = std::move(res);
    }
    if (!best)
        throw std::runtime_error("qsvbw: no start produced a usable fit");
    return std::move(*best);
}

int select_degree(const Dataset& data, const QsvbwConfig& cfg) {
    if (cfg.degree_candidates.empty())
        throw std::invalid_argument("select_degree: no degree candidates");
    if (cfg.degree_candidates.size() == 1)
        return cfg.degree_candidates.front();
    if (!(cfg.cv_train_fraction > 0.0 && cfg.cv_train_fraction < 1.0))
        throw std::invalid_argument("select_degree: cv_train_fraction must lie in (0, 1)");
    if (cfg.cv_max_iters < 1)
        throw std::invalid_argument("select_degree: cv_max_iters must be >= 1");

    const auto n = data.size();
    const auto n_fit = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.cv_train_fraction * static_cast<double>(n))),
        1, n - 1);
    const auto [fit_set, val_set] = split(data, n_fit);

    std::vector<int> candidates = cfg.degree_candidates;
    std::sort(candidates.begin(), candidates.end());

    QsvbwConfig sub = cfg;
    sub.max_iters = cfg.cv_max_iters;

    int best_degree = candidates.front();
    double best_score = kNegInf;
    for (int d : candidates) {
        double score = kNegInf;
        try {
            const QsvbwResult res = run_fixed_degree(fit_set, sub, d);
            const Prediction pred = decode_and_predict(res.coeffs, cfg.grid, res.hmm, val_set);
            score = bfr(val_set.y, pred.y_hat);
        } catch (const std::exception&) {
            // a candidate that cannot be fit or scored simply loses
        }
        if (score > best_score) {
            best_score = score;
            best_degree = d;
        }
    }
    return best_degree;
}

QsvbwResult run(const Dataset& data, const QsvbwConfig& cfg, const IterationObserver& observer) {
    if (cfg.degree_candidates.empty())
        throw std::invalid_argument("qsvbw: no degree candidates");
    const int degree = cfg.degree_candidates.size() == 1 ? cfg.degree_candidates.front()
                                                         : select_degree(data, cfg);
    return run_fixed_degree(data, cfg, degree, observer);
}

}  // namespace blpv
