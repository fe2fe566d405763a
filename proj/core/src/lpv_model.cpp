#include "blpv/lpv_model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace blpv {

SchedulingGrid::SchedulingGrid(std::vector<double> levels) : levels_(std::move(levels)) {
    if (levels_.size() < 2)
        throw std::invalid_argument("SchedulingGrid: need at least two levels");
    for (std::size_t j = 0; j < levels_.size(); ++j) {
        if (!std::isfinite(levels_[j]))
            throw std::invalid_argument("SchedulingGrid: levels must be finite");
        if (j > 0 && !(levels_[j] > levels_[j - 1]))
            throw std::invalid_argument("SchedulingGrid: levels must be strictly increasing");
    }
}

bool SchedulingGrid::contains(double p) const noexcept {
    for (double v : levels_)
        if (v == p) return true;
    return false;
}

std::size_t SchedulingGrid::index_of(double p) const {
    for (std::size_t j = 0; j < levels_.size(); ++j)
        if (levels_[j] == p) return j;
    throw std::invalid_argument("SchedulingGrid: value is not a grid level");
}

CoeffMatrix::CoeffMatrix(int degree, int n_taps) {
    if (degree < 0 || n_taps < 1)
        throw std::invalid_argument("CoeffMatrix: degree must be >= 0 and n_taps >= 1");
    entries = Eigen::MatrixXd::Zero(degree + 1, n_taps);
}

CoeffMatrix::CoeffMatrix(Eigen::MatrixXd m) : entries(std::move(m)) {
    if (entries.rows() < 1 || entries.cols() < 1)
        throw std::invalid_argument("CoeffMatrix: empty matrix");
    if (!entries.allFinite())
        throw std::invalid_argument("CoeffMatrix: entries must be finite");
}

Eigen::VectorXd basis_vector(double p, int degree) {
    if (!std::isfinite(p))
        throw std::invalid_argument("basis_vector: p must be finite");
    if (degree < 0)
        throw std::invalid_argument("basis_vector: degree must be >= 0");
    Eigen::VectorXd b(degree + 1);
    b(degree) = 1.0;
    for (int v = degree - 1; v >= 0; --v)
        b(v) = b(v + 1) * p;
    return b;
}

Eigen::VectorXd regressor(std::span<const double> u, std::size_t k, int n_taps) {
    if (n_taps < 1)
        throw std::invalid_argument("regressor: n_taps must be >= 1");
    if (k < 1 || k > u.size())
        throw std::invalid_argument("regressor: sample index out of range");
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n_taps);
    for (int i = 0; i < n_taps; ++i) {
        // element i holds u(k - i); indices before the first sample are zero
        if (k > static_cast<std::size_t>(i))
            phi(i) = u[k - i - 1];
    }
    return phi;
}

double mean_output(const CoeffMatrix& coeffs, double p, const Eigen::VectorXd& phi) {
    if (phi.size() != coeffs.n_taps())
        throw std::invalid_argument("mean_output: regressor length does not match n_taps");
    Eigen::VectorXd b = basis_vector(p, coeffs.degree());
    return b.dot(coeffs.entries * phi);
}

Dataset simulate(const LpvFirModel& model, std::span<const double> u,
                 std::span<const double> p, std::uint64_t seed) {
    if (u.size() != p.size())
        throw std::invalid_argument("simulate: u and p must have the same length");
    if (u.empty())
        throw std::invalid_argument("simulate: empty input");
    if (!(model.noise_std >= 0.0) || !std::isfinite(model.noise_std))
        throw std::invalid_argument("simulate: noise_std must be finite and >= 0");
    for (double pk : p)
        if (!model.grid.contains(pk))
            throw std::invalid_argument("simulate: scheduling value off the model grid");

    const std::size_t n = u.size();
    Dataset data;
    data.u.assign(u.begin(), u.end());
    data.p_true = std::vector<double>(p.begin(), p.end());
    data.seed = seed;
    data.y.resize(n);
    data.y_clean = std::vector<double>(n);

    for (std::size_t k = 1; k <= n; ++k) {
        Eigen::VectorXd phi = regressor(u, k, model.coeffs.n_taps());
        (*data.y_clean)[k - 1] = mean_output(model.coeffs, p[k - 1], phi);
    }

    if (model.noise_std == 0.0) {
        data.y = *data.y_clean;
        return data;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, model.noise_std);
    for (std::size_t k = 0; k < n; ++k)
        data.y[k] = (*data.y_clean)[k] + noise(rng);
    return data;
}

double benchmark_coefficient(int tap, double p) {
    switch (tap) {
        case 1: return -std::exp(p);
        case 2: return 1.0 + p;
        case 3: return std::atan(p);
        case 4: return -p;
        case 5: return -std::sin(p);
        default: throw std::invalid_argument("benchmark_coefficient: tap must be in 1..5");
    }
}

SchedulingGrid benchmark_grid() {
    std::vector<double> levels(10);
    for (int j = 0; j < 10; ++j)
        levels[j] = (j + 1) / 10.0;
    return SchedulingGrid(levels);
}

Dataset benchmark_generator(std::size_t n_samples, double snr_db, std::uint64_t seed) {
    if (n_samples < 1)
        throw std::invalid_argument("benchmark_generator: n_samples must be >= 1");
    if (!std::isfinite(snr_db))
        throw std::invalid_argument("benchmark_generator: snr_db must be finite");

    const SchedulingGrid grid = benchmark_grid();
    const std::size_t n_taps = 5;
    std::mt19937_64 rng(seed);

    // Step-wise scheduling path: dwell uniform on [10, 40] samples, level
    // uniform over the grid.
    std::vector<double> p(n_samples);
    std::uniform_int_distribution<int> dwell(10, 40);
    std::uniform_int_distribution<std::size_t> level(0, grid.size() - 1);
    std::size_t k = 0;
    while (k < n_samples) {
        const std::size_t len = static_cast<std::size_t>(dwell(rng));
        const double value = grid.level(level(rng));
        for (std::size_t i = 0; i < len && k < n_samples; ++i, ++k)
            p[k] = value;
    }

    Dataset data;
    data.seed = seed;
    data.u.resize(n_samples);
    for (std::size_t i = 1; i <= n_samples; ++i)
        data.u[i - 1] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 9.0);
    data.p_true = p;

    std::vector<double> y_clean(n_samples, 0.0);
    for (std::size_t i = 1; i <= n_samples; ++i) {
        double acc = 0.0;
        for (std::size_t tap = 1; tap <= n_taps; ++tap) {
            if (i >= tap)
                acc += benchmark_coefficient(static_cast<int>(tap), p[i - 1]) * data.u[i - tap];
        }
        y_clean[i - 1] = acc;
    }
    data.y_clean = y_clean;

    double power_y = 0.0;
    for (double v : y_clean) power_y += v * v;
    power_y /= static_cast<double>(n_samples);

    const double sigma2 = power_y * std::pow(10.0, -snr_db / 10.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> e(n_samples);
    double power_e = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        e[i] = gauss(rng);
        power_e += e[i] * e[i];
    }
    power_e /= static_cast<double>(n_samples);
    // Scale the realized noise power to sigma2 exactly so the emitted dataset
    // hits the requested ratio, not just in expectation.
    const double scale = power_e > 0.0 ? std::sqrt(sigma2 / power_e) : 0.0;

    data.y.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        data.y[i] = y_clean[i] + scale * e[i];
    return data;
}

}  // namespace blpv
