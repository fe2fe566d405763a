// blpv - blind identification of LPV-FIR systems with an unmeasured
// scheduling variable. Subcommands: generate, identify, evaluate, benchmark.

#include <blpv/evalio.hpp>
#include <blpv/lpv_model.hpp>
#include <blpv/qsvbw.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- logging

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

LogLevel g_log_level = LogLevel::warn;

void init_log_level() {
    const char* env = std::getenv("BLPV_LOG");
    if (!env) return;
    const std::string v(env);
    if (v == "debug") g_log_level = LogLevel::debug;
    else if (v == "info") g_log_level = LogLevel::info;
    else if (v == "warn") g_log_level = LogLevel::warn;
    else if (v == "error") g_log_level = LogLevel::error;
}

void log(LogLevel level, const std::string& msg) {
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (level >= g_log_level)
        std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

// ---------------------------------------------------------------- manifest

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now() {
    const std::time_t t =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Accumulates one manifest per run: config snapshot, seed, file paths with
// content hashes, timestamps.
class Manifest {
public:
    Manifest(std::string command, json config_snapshot, std::uint64_t seed)
        : started_(utc_now()), command_(std::move(command)),
          config_(std::move(config_snapshot)), seed_(seed) {}

    void add_input(const fs::path& path) { add(inputs_, path); }
    void add_output(const fs::path& path) { add(outputs_, path); }

    void write(const fs::path& path) const {
        json j;
        j["command"] = command_;
        j["config"] = config_;
        j["seed"] = seed_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["started_at_utc"] = started_;
        j["finished_at_utc"] = utc_now();
        blpv::save_text(j.dump(2) + "\n", path);
        log(LogLevel::info, "wrote manifest " + path.string());
    }

private:
    static void add(json& list, const fs::path& path) {
        json entry;
        entry["path"] = path.string();
        entry["fnv1a64"] = hex64(fnv1a64(blpv::load_text(path)));
        list.push_back(entry);
    }

    std::string started_;
    std::string command_;
    json config_;
    std::uint64_t seed_;
    json inputs_ = json::array();
    json outputs_ = json::array();
};

// ---------------------------------------------------------------- config

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    return json::parse(blpv::load_text(path));
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

blpv::SwarmConfig swarm_from_json(const json& j, std::uint64_t default_seed) {
    blpv::SwarmConfig cfg;
    cfg.n_particles = get_or(j, "n_particles", cfg.n_particles);
    cfg.n_iters = get_or(j, "n_iters", cfg.n_iters);
    cfg.inertia = get_or(j, "inertia", cfg.inertia);
    cfg.cognitive = get_or(j, "cognitive", cfg.cognitive);
    cfg.social = get_or(j, "social", cfg.social);
    cfg.lower_bound = get_or(j, "lower_bound", cfg.lower_bound);
    cfg.upper_bound = get_or(j, "upper_bound", cfg.upper_bound);
    cfg.seed = get_or(j, "seed", default_seed);
    return cfg;
}

blpv::QsvbwConfig identify_config(const json& config, std::uint64_t seed,
                                  bool seed_overrides_swarm) {
    const json section = config.value("identify", json::object());
    std::vector<double> grid_values = get_or(section, "grid", std::vector<double>{});
    blpv::SchedulingGrid grid =
        grid_values.empty() ? blpv::benchmark_grid() : blpv::SchedulingGrid(grid_values);

    blpv::QsvbwConfig cfg{std::move(grid)};
    cfg.n_taps = get_or(section, "n_taps", 5);
    cfg.degree_candidates = get_or(section, "degree_candidates", std::vector<int>{2, 3, 4, 5});
    cfg.max_iters = get_or(section, "max_iters", cfg.max_iters);
    cfg.loglik_rel_tol = get_or(section, "loglik_rel_tol", cfg.loglik_rel_tol);
    cfg.sweeps_per_iter = get_or(section, "sweeps_per_iter", cfg.sweeps_per_iter);
    cfg.cv_train_fraction = get_or(section, "cv_train_fraction", cfg.cv_train_fraction);
    cfg.cv_max_iters = get_or(section, "cv_max_iters", cfg.cv_max_iters);
    cfg.seed = seed;
    cfg.swarm = swarm_from_json(section.value("swarm", json::object()), seed);
    if (seed_overrides_swarm) cfg.swarm.seed = seed;
    return cfg;
}

// ---------------------------------------------------------------- helpers

blpv::Score score_against(const blpv::Dataset& data, const blpv::Prediction& pred,
                          bool against_clean) {
    blpv::Score score;
    const std::vector<double>& reference =
        against_clean && data.y_clean ? *data.y_clean : data.y;
    score.bfr_output = blpv::bfr(reference, pred.y_hat);
    if (data.p_true) {
        score.bfr_scheduling = blpv::bfr(*data.p_true, pred.p_hat);
        std::size_t hits = 0;
        for (std::size_t k = 0; k < data.size(); ++k)
            if ((*data.p_true)[k] == pred.p_hat[k]) ++hits;
        score.scheduling_accuracy = double(hits) / double(data.size());
    }
    return score;
}

std::string trace_csv(const std::vector<double>& trace) {
    std::string out = "iteration,loglik\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, trace[i]);
        out += buf;
    }
    return out;
}

blpv::IterationObserver progress_observer() {
    return [](int iteration, double loglik) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "iteration %d: loglik %.6f", iteration, loglik);
        log(LogLevel::debug, buf);
    };
}

// ---------------------------------------------------------------- commands

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_flag) {
    const json config = load_config(config_path);
    const json section = config.value("generate", json::object());
    const auto n_samples = get_or<std::size_t>(section, "n_samples", 500);
    const double snr = get_or(section, "snr_db", 21.57);
    const std::uint64_t seed = seed_flag ? *seed_flag : get_or<std::uint64_t>(config, "seed", 0);

    log(LogLevel::info, "generating " + std::to_string(n_samples) + " samples, seed " +
                            std::to_string(seed));
    const blpv::Dataset data = blpv::benchmark_generator(n_samples, snr, seed);
    blpv::save_dataset_csv(data, out_path);

    Manifest manifest("generate", config, seed);
    manifest.add_output(out_path);
    manifest.write(out_path + ".manifest.json");
    return 0;
}

int cmd_identify(const std::string& dataset_path, const std::string& config_path,
                 const std::string& out_path, std::optional<std::uint64_t> seed_flag) {
    const json config = load_config(config_path);
    const std::uint64_t seed = seed_flag ? *seed_flag : get_or<std::uint64_t>(config, "seed", 0);
    const blpv::QsvbwConfig cfg = identify_config(config, seed, seed_flag.has_value());

    const blpv::Dataset data = blpv::load_dataset_csv(dataset_path);
    log(LogLevel::info, "identifying on " + std::to_string(data.size()) + " samples");
    const blpv::QsvbwResult result = blpv::run(data, cfg, progress_observer());
    log(LogLevel::info, "chosen degree " + std::to_string(result.chosen_degree) + ", " +
                            std::to_string(result.iterations_run) + " iterations");

    blpv::save_text(blpv::to_json(blpv::ResultFile{result, cfg.grid}), out_path);
    const std::string trace_path = out_path + ".trace.csv";
    blpv::save_text(trace_csv(result.loglik_trace), trace_path);

    Manifest manifest("identify", config, seed);
    manifest.add_input(dataset_path);
    manifest.add_output(out_path);
    manifest.add_output(trace_path);
    manifest.write(out_path + ".manifest.json");
    return 0;
}

int cmd_evaluate(const std::string& result_path, const std::string& dataset_path,
                 const std::string& out_path) {
    const blpv::ResultFile file = blpv::result_from_json(blpv::load_text(result_path));
    const blpv::Dataset data = blpv::load_dataset_csv(dataset_path);

    const blpv::Prediction pred =
        blpv::decode_and_predict(file.result.coeffs, file.grid, file.result.hmm, data);
    const blpv::Score score = score_against(data, pred, /*against_clean=*/false);
    blpv::save_text(blpv::to_json(score), out_path);

    Manifest manifest("evaluate", json::object(), 0);
    manifest.add_input(result_path);
    manifest.add_input(dataset_path);
    manifest.add_output(out_path);
    manifest.write(out_path + ".manifest.json");
    return 0;
}

json run_benchmark_seed(const json& config, std::uint64_t seed, const fs::path& seed_dir,
                        Manifest& manifest) {
    const json generate_section = config.value("generate", json::object());
    const auto n_samples = get_or<std::size_t>(generate_section, "n_samples", 500);
    const double snr = get_or(generate_section, "snr_db", 21.57);
    const auto n_train = get_or<std::size_t>(config.value("split", json::object()), "n_train",
                                             n_samples / 2);

    const auto t0 = std::chrono::steady_clock::now();
    const blpv::Dataset data = blpv::benchmark_generator(n_samples, snr, seed);
    const auto [train, test] = blpv::split(data, n_train);

    const blpv::QsvbwConfig cfg = identify_config(config, seed, /*seed_overrides_swarm=*/true);
    const blpv::QsvbwResult result = blpv::run(train, cfg, progress_observer());
    const blpv::Prediction pred =
        blpv::decode_and_predict(result.coeffs, cfg.grid, result.hmm, test);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(seed_dir);
    blpv::save_dataset_csv(train, seed_dir / "train.csv");
    blpv::save_dataset_csv(test, seed_dir / "test.csv");
    blpv::save_text(blpv::to_json(blpv::ResultFile{result, cfg.grid}), seed_dir / "result.json");

    // plot-ready series over the test set: measured vs estimated output and
    // true vs decoded scheduling
    std::string series = "k,y,y_clean,y_hat,p,p_hat\n";
    char buf[256];
    for (std::size_t k = 0; k < test.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", k + 1, test.y[k],
                      (*test.y_clean)[k], pred.y_hat[k], (*test.p_true)[k], pred.p_hat[k]);
        series += buf;
    }
    blpv::save_text(series, seed_dir / "series.csv");

    json score;
    score["seed"] = seed;
    // score against the deterministic component (available here because the
    // harness generated the data) and against the measured output
    score["bfr_output_clean"] = blpv::bfr(*test.y_clean, pred.y_hat);
    score["bfr_output_noisy"] = blpv::bfr(test.y, pred.y_hat);
    const blpv::Score sched = score_against(test, pred, /*against_clean=*/false);
    score["bfr_scheduling"] = sched.bfr_scheduling ? json(*sched.bfr_scheduling) : json(nullptr);
    score["scheduling_accuracy"] =
        sched.scheduling_accuracy ? json(*sched.scheduling_accuracy) : json(nullptr);
    score["chosen_degree"] = result.chosen_degree;
    score["iterations_run"] = result.iterations_run;
    score["elapsed_seconds"] = elapsed;
    blpv::save_text(score.dump(2) + "\n", seed_dir / "score.json");

    for (const char* name : {"train.csv", "test.csv", "result.json", "series.csv", "score.json"})
        manifest.add_output(seed_dir / name);

    std::snprintf(buf, sizeof(buf), "seed %llu: output bfr %.2f (clean), scheduling bfr %.2f, %.1fs",
                  static_cast<unsigned long long>(seed), score["bfr_output_clean"].get<double>(),
                  sched.bfr_scheduling ? *sched.bfr_scheduling : -1.0, elapsed);
    log(LogLevel::info, buf);
    return score;
}

int cmd_benchmark(const std::string& config_path, const std::string& out_dir,
                  std::vector<std::uint64_t> seeds) {
    const json config = load_config(config_path);
    if (seeds.empty())
        seeds = get_or(config, "seeds",
                       std::vector<std::uint64_t>{get_or<std::uint64_t>(config, "seed", 0)});

    fs::create_directories(out_dir);
    Manifest manifest("benchmark", config, seeds.front());

    json per_seed = json::array();
    for (const std::uint64_t seed : seeds) {
        const fs::path seed_dir = fs::path(out_dir) / ("seed_" + std::to_string(seed));
        per_seed.push_back(run_benchmark_seed(config, seed, seed_dir, manifest));
    }

    auto stats = [&](const char* key) {
        double mean = 0.0;
        for (const auto& s : per_seed) mean += s.at(key).get<double>();
        mean /= double(per_seed.size());
        double var = 0.0;
        for (const auto& s : per_seed) {
            const double d = s.at(key).get<double>() - mean;
            var += d * d;
        }
        json j;
        j["mean"] = mean;
        j["std"] = std::sqrt(var / double(per_seed.size()));
        return j;
    };

    json summary;
    summary["seeds"] = seeds;
    summary["per_seed"] = per_seed;
    summary["bfr_output_clean"] = stats("bfr_output_clean");
    summary["bfr_output_noisy"] = stats("bfr_output_noisy");
    summary["bfr_scheduling"] = stats("bfr_scheduling");
    summary["scheduling_accuracy"] = stats("scheduling_accuracy");
    summary["elapsed_seconds"] = stats("elapsed_seconds");
    json degree_histogram = json::object();
    for (const auto& s : per_seed) {
        const std::string key = std::to_string(s.at("chosen_degree").get<int>());
        degree_histogram[key] = degree_histogram.value(key, 0) + 1;
    }
    summary["chosen_degree_histogram"] = degree_histogram;

    const fs::path summary_path = fs::path(out_dir) / "summary.json";
    blpv::save_text(summary.dump(2) + "\n", summary_path);
    manifest.add_output(summary_path);
    manifest.write(fs::path(out_dir) / "manifest.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_log_level();

    CLI::App app{"blind identification of LPV-FIR systems (unmeasured scheduling variable)"};
    app.require_subcommand(1);

    std::string config_path, out_path, dataset_path, result_path;
    std::optional<std::uint64_t> seed_flag;
    std::vector<std::uint64_t> seeds;

    auto* generate = app.add_subcommand("generate", "generate a benchmark dataset CSV");
    generate->add_option("--config", config_path, "JSON config file");
    generate->add_option("--out", out_path, "output CSV path")->required();
    generate->add_option("--seed", seed_flag, "seed override");

    auto* identify = app.add_subcommand("identify", "fit a model to a dataset CSV");
    identify->add_option("dataset", dataset_path, "input dataset CSV")->required();
    identify->add_option("--config", config_path, "JSON config file");
    identify->add_option("--out", out_path, "output result JSON path")->required();
    identify->add_option("--seed", seed_flag, "seed override");

    auto* evaluate = app.add_subcommand("evaluate", "score a result against a dataset CSV");
    evaluate->add_option("result", result_path, "result JSON from identify")->required();
    evaluate->add_option("dataset", dataset_path, "dataset CSV to score on")->required();
    evaluate->add_option("--out", out_path, "output score JSON path")->required();

    auto* benchmark = app.add_subcommand("benchmark", "generate/fit/score across seeds");
    benchmark->add_option("--config", config_path, "JSON config file");
    benchmark->add_option("--out", out_path, "output directory")->required();
    benchmark->add_option("--seeds", seeds, "comma-separated seed list")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(config_path, out_path, seed_flag);
        if (identify->parsed()) return cmd_identify(dataset_path, config_path, out_path, seed_flag);
        if (evaluate->parsed()) return cmd_evaluate(result_path, dataset_path, out_path);
        if (benchmark->parsed()) return cmd_benchmark(config_path, out_path, seeds);
    } catch (const std::exception& e) {
        json err;
        err["error"]["type"] = typeid(e).name();
        err["error"]["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 1;
}
