#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace blpv {

/// Discrete scheduling space: a strictly increasing list of at least two
/// finite levels. State index j refers to values()[j].
class SchedulingGrid {
public:
    explicit SchedulingGrid(std::vector<double> levels);

    std::size_t size() const noexcept { return levels_.size(); }
    double level(std::size_t j) const { return levels_.at(j); }
    const std::vector<double>& values() const noexcept { return levels_; }

    bool contains(double p) const noexcept;

    /// Index of an exact grid level; throws std::invalid_argument if p is off-grid.
    std::size_t index_of(double p) const;

private:
    std::vector<double> levels_;
};

/// Polynomial coefficient matrix of an LPV-FIR model, shape (degree+1) x n_taps.
/// Column w holds the coefficients of tap w's gain polynomial, highest power
/// first; the last row is the constant term.
struct CoeffMatrix {
    Eigen::MatrixXd entries;

    CoeffMatrix(int degree, int n_taps);  // zero-initialized
    explicit CoeffMatrix(Eigen::MatrixXd m);

    int degree() const noexcept { return static_cast<int>(entries.rows()) - 1; }
    int n_taps() const noexcept { return static_cast<int>(entries.cols()); }
};

struct LpvFirModel {
    CoeffMatrix coeffs;
    SchedulingGrid grid;
    double noise_std = 0.0;  // >= 0
};

/// Time-indexed single-channel records. p_true and y_clean are filled by the
/// simulators; CSV serialization keeps u, y and (when present) p_true.
struct Dataset {
    std::vector<double> u;
    std::vector<double> y;
    std::optional<std::vector<double>> p_true;
    std::optional<std::vector<double>> y_clean;
    std::optional<std::uint64_t> seed;

    std::size_t size() const noexcept { return y.size(); }
};

/// [p^d, p^(d-1), ..., p, 1], length degree+1.
Eigen::VectorXd basis_vector(double p, int degree);

/// FIR regressor [u(k), u(k-1), ..., u(k-n_taps+1)] at 1-based sample index k.
/// Samples before the first are zero.
Eigen::VectorXd regressor(std::span<const double> u, std::size_t k, int n_taps);

/// basis_vector(p, coeffs.degree())' * coeffs * phi.
double mean_output(const CoeffMatrix& coeffs, double p, const Eigen::VectorXd& phi);

/// y(k) = mean_output(coeffs, p(k), phi(k)) + e(k) with e iid N(0, noise_std^2).
/// Deterministic for a fixed seed; noise_std == 0 gives the noise-free output
/// independent of the seed. Every p(k) must lie on the model grid.
Dataset simulate(const LpvFirModel& model, std::span<const double> u,
                 std::span<const double> p, std::uint64_t seed);

/// Periodic-input benchmark dataset: u(k) = sin(2*pi*k/9), a step-wise random
/// scheduling signal over {0.1, ..., 1.0} (segment length uniform on [10, 40]
/// samples, level uniform over the grid) driving five fixed nonlinear tap
/// gains, plus white Gaussian noise scaled so that the realized ratio of
/// deterministic output power to noise power equals snr_db exactly.
Dataset benchmark_generator(std::size_t n_samples, double snr_db, std::uint64_t seed);

/// The scheduling grid used by benchmark_generator.
SchedulingGrid benchmark_grid();

/// True tap gain g_tap(p) of the benchmark system, tap in 1..5.
double benchmark_coefficient(int tap, double p);

}  // namespace blpv
