#pragma once

#include "blpv/hmm.hpp"
#include "blpv/lpv_model.hpp"
#include "blpv/qsvbw.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace blpv {

struct Score {
    double bfr_output = 0.0;                    // percent, in [0, 100]
    std::optional<double> bfr_scheduling;       // percent, needs ground truth
    std::optional<double> scheduling_accuracy;  // fraction of exactly matched levels
    std::optional<double> snr_db;
};

/// Best-fit rate 100 * max(0, 1 - ||x - xhat||_2 / ||x - mean(x)||_2), percent.
/// Throws std::invalid_argument on length mismatch or length < 2 and
/// std::domain_error when x_true is constant.
double bfr(std::span<const double> x_true, std::span<const double> x_est);

/// Contiguous prefix/suffix split preserving order. The suffix becomes a fresh
/// dataset whose samples re-index from 1, so FIR regressors zero-pad again at
/// its boundary.
std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_train);

/// 10*log10(mean(y_clean^2) / mean(e^2)).
double snr_db(std::span<const double> y_clean, std::span<const double> noise);

// --- dataset CSV format: header "k,u,y" or "k,u,y,p", 1-based k, values with
// --- 17 significant digits so a write/read round trip is exact.

std::string to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text);
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

// --- JSON formats ---

/// {"degree", "n_taps", "grid", "H" (row-major), "sigma"}
std::string to_json(const LpvFirModel& model);
LpvFirModel model_from_json(const std::string& text);

/// {"A" (row-major), "pi", "sigma2"}
std::string to_json(const HmmParams& params);
HmmParams hmm_from_json(const std::string& text);

/// Identification result bundled with the grid it was fit on.
struct ResultFile {
    QsvbwResult result;
    SchedulingGrid grid;
};

/// {"H" (row-major), "degree", "n_taps", "grid", "A" (row-major), "pi",
///  "sigma2", "path", "loglik_trace", "chosen_degree", "iterations_run"}
std::string to_json(const ResultFile& file);
ResultFile result_from_json(const std::string& text);

std::string to_json(const Score& score);

void save_text(const std::string& text, const std::filesystem::path& path);
std::string load_text(const std::filesystem::path& path);

}  // namespace blpv
