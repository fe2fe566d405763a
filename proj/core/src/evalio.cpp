#include "blpv/evalio.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace blpv {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& field) {
    std::size_t pos = 0;
    const double v = std::stod(field, &pos);
    if (pos != field.size())
        throw std::invalid_argument("CSV: malformed number '" + field + "'");
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            rows.push_back(m(i, j));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const char* what) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(rows * cols))
        throw std::invalid_argument(std::string(what) + ": bad row-major matrix length");
    Eigen::MatrixXd m(rows, cols);
    std::size_t idx = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j2 = 0; j2 < cols; ++j2)
            m(i, j2) = j[idx++].get<double>();
    return m;
}

}  // namespace

double bfr(std::span<const double> x_true, std::span<const double> x_est) {
    if (x_true.size() != x_est.size())
        throw std::invalid_argument("bfr: sequences must have the same length");
    if (x_true.size() < 2)
        throw std::invalid_argument("bfr: need at least two samples");

    double mean = 0.0;
    for (double v : x_true) mean += v;
    mean /= static_cast<double>(x_true.size());

    double err = 0.0, spread = 0.0;
    for (std::size_t k = 0; k < x_true.size(); ++k) {
        err += (x_true[k] - x_est[k]) * (x_true[k] - x_est[k]);
        spread += (x_true[k] - mean) * (x_true[k] - mean);
    }
    if (spread == 0.0)
        throw std::domain_error("bfr: undefined for a constant reference sequence");
    return 100.0 * std::max(0.0, 1.0 - std::sqrt(err) / std::sqrt(spread));
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_train) {
    if (n_train < 1 || n_train >= data.size())
        throw std::invalid_argument("split: n_train must satisfy 1 <= n_train < N");

    auto take = [&](std::size_t first, std::size_t count) {
        Dataset part;
        part.u.assign(data.u.begin() + first, data.u.begin() + first + count);
        part.y.assign(data.y.begin() + first, data.y.begin() + first + count);
        if (data.p_true)
            part.p_true = std::vector<double>(data.p_true->begin() + first,
                                              data.p_true->begin() + first + count);
        if (data.y_clean)
            part.y_clean = std::vector<double>(data.y_clean->begin() + first,
                                               data.y_clean->begin() + first + count);
        part.seed = data.seed;
        return part;
    };
    return {take(0, n_train), take(n_train, data.size() - n_train)};
}

double snr_db(std::span<const double> y_clean, std::span<const double> noise) {
    if (y_clean.empty() || noise.empty())
        throw std::invalid_argument("snr_db: sequences must be non-empty");
    double p_y = 0.0, p_e = 0.0;
    for (double v : y_clean) p_y += v * v;
    for (double v : noise) p_e += v * v;
    p_y /= static_cast<double>(y_clean.size());
    p_e /= static_cast<double>(noise.size());
    if (p_e == 0.0)
        throw std::domain_error("snr_db: zero noise power");
    return 10.0 * std::log10(p_y / p_e);
}

std::string to_csv(const Dataset& data) {
    if (data.u.size() != data.y.size())
        throw std::invalid_argument("to_csv: u and y must have the same length");
    if (data.p_true && data.p_true->size() != data.size())
        throw std::invalid_argument("to_csv: p_true length mismatch");

    std::string out = data.p_true ? "k,u,y,p\n" : "k,u,y\n";
    for (std::size_t k = 0; k < data.size(); ++k) {
        out += std::to_string(k + 1);
        out += ',';
        out += fmt17(data.u[k]);
        out += ',';
        out += fmt17(data.y[k]);
        if (data.p_true) {
            out += ',';
            out += fmt17((*data.p_true)[k]);
        }
        out += '\n';
    }
    return out;
}

Dataset dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    bool has_p = false;
    if (line == "k,u,y,p")
        has_p = true;
    else if (line != "k,u,y")
        throw std::invalid_argument("CSV: header must be 'k,u,y' or 'k,u,y,p'");

    Dataset data;
    if (has_p) data.p_true = std::vector<double>{};
    std::size_t expected_k = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != (has_p ? 4u : 3u))
            throw std::invalid_argument("CSV: wrong field count in row '" + line + "'");
        if (static_cast<std::size_t>(std::stoull(fields[0])) != expected_k)
            throw std::invalid_argument("CSV: sample indices must run 1..N");
        ++expected_k;
        data.u.push_back(parse_double(fields[1]));
        data.y.push_back(parse_double(fields[2]));
        if (has_p) data.p_true->push_back(parse_double(fields[3]));
    }
    if (data.size() == 0)
        throw std::invalid_argument("CSV: no samples");
    return data;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
    save_text(to_csv(data), path);
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    return dataset_from_csv(load_text(path));
}

std::string to_json(const LpvFirModel& model) {
    json j;
    j["degree"] = model.coeffs.degree();
    j["n_taps"] = model.coeffs.n_taps();
    j["grid"] = model.grid.values();
    j["H"] = matrix_to_json(model.coeffs.entries);
    j["sigma"] = model.noise_std;
    return j.dump(2) + "\n";
}

LpvFirModel model_from_json(const std::string& text) {
    const json j = json::parse(text);
    const int degree = j.at("degree").get<int>();
    const int n_taps = j.at("n_taps").get<int>();
    CoeffMatrix coeffs(matrix_from_json(j.at("H"), degree + 1, n_taps, "model H"));
    SchedulingGrid grid(j.at("grid").get<std::vector<double>>());
    return LpvFirModel{std::move(coeffs), std::move(grid), j.at("sigma").get<double>()};
}

std::string to_json(const HmmParams& params) {
    json j;
    j["A"] = matrix_to_json(params.a.a);
    j["pi"] = std::vector<double>(params.pi.pi.data(), params.pi.pi.data() + params.pi.pi.size());
    j["sigma2"] = params.sigma2;
    return j.dump(2) + "\n";
}

HmmParams hmm_from_json(const std::string& text) {
    const json j = json::parse(text);
    const auto pi_values = j.at("pi").get<std::vector<double>>();
    const auto m = static_cast<Eigen::Index>(pi_values.size());
    TransitionMatrix a(matrix_from_json(j.at("A"), m, m, "hmm A"));
    InitialDist pi(Eigen::Map<const Eigen::VectorXd>(pi_values.data(), m));
    return HmmParams{std::move(a), std::move(pi), j.at("sigma2").get<double>()};
}

std::string to_json(const ResultFile& file) {
    json j;
    j["H"] = matrix_to_json(file.result.coeffs.entries);
    j["degree"] = file.result.coeffs.degree();
    j["n_taps"] = file.result.coeffs.n_taps();
    j["grid"] = file.grid.values();
    j["A"] = matrix_to_json(file.result.hmm.a.a);
    j["pi"] = std::vector<double>(file.result.hmm.pi.pi.data(),
                                  file.result.hmm.pi.pi.data() + file.result.hmm.pi.pi.size());
    j["sigma2"] = file.result.hmm.sigma2;
    j["path"] = file.result.path;
    j["loglik_trace"] = file.result.loglik_trace;
    j["chosen_degree"] = file.result.chosen_degree;
    j["iterations_run"] = file.result.iterations_run;
    return j.dump(2) + "\n";
}

ResultFile result_from_json(const std::string& text) {
    const json j = json::parse(text);
    const int degree = j.at("degree").get<int>();
    const int n_taps = j.at("n_taps").get<int>();
    SchedulingGrid grid(j.at("grid").get<std::vector<double>>());
    const auto m = static_cast<Eigen::Index>(grid.size());

    CoeffMatrix coeffs(matrix_from_json(j.at("H"), degree + 1, n_taps, "result H"));
    TransitionMatrix a(matrix_from_json(j.at("A"), m, m, "result A"));
    const auto pi_values = j.at("pi").get<std::vector<double>>();
    if (pi_values.size() != grid.size())
        throw std::invalid_argument("result pi: length must match the grid");
    InitialDist pi(Eigen::Map<const Eigen::VectorXd>(pi_values.data(), m));

    QsvbwResult result{std::move(coeffs),
                       HmmParams{std::move(a), std::move(pi), j.at("sigma2").get<double>()},
                       j.at("path").get<std::vector<double>>(),
                       j.at("loglik_trace").get<std::vector<double>>(),
                       j.at("chosen_degree").get<int>(),
                       j.at("iterations_run").get<int>()};
    return ResultFile{std::move(result), std::move(grid)};
}

std::string to_json(const Score& score) {
    json j;
    j["bfr_output"] = score.bfr_output;
    j["bfr_scheduling"] = score.bfr_scheduling ? json(*score.bfr_scheduling) : json(nullptr);
    j["scheduling_accuracy"] =
        score.scheduling_accuracy ? json(*score.scheduling_accuracy) : json(nullptr);
    j["snr_db"] = score.snr_db ? json(*score.snr_db) : json(nullptr);
    return j.dump(2) + "\n";
}

void save_text(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

std::string load_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace blpv
