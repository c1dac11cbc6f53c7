#pragma once

// Batch runs: build a scene set (generated from a seed or read from a directory), run the
// selected solvers on every scene with a worker pool, merge results in scene order and write
// per-scene JSON plus the summary table and histogram.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "past/errors.hpp"
#include "past/harness.hpp"
#include "past/record_io.hpp"
#include "past/report.hpp"
#include "past/rng.hpp"
#include "past/scenario_io.hpp"
#include "past/scene.hpp"
#include "past/search.hpp"

namespace past {

/// Environment variable that overrides RunConfig::output_dir.
inline constexpr const char* kOutputDirEnv = "PAST_OUTPUT_DIR";

struct RunConfig {
    /// Scene source: generate `scene_count` scenes from this seed, or read `scenario_dir`.
    std::optional<std::uint64_t> generate_seed;
    std::filesystem::path scenario_dir;
    int scene_count{20};
    /// Layout parameters for generated scenes (vehicles are placed by the random layout).
    ScenarioConfig scene = [] {
        ScenarioConfig c;
        c.vehicle_count = 4;
        return c;
    }();

    std::vector<std::string> solvers{"past", "mc"};
    MctsParams mcts;
    int mc_iterations{2000};
    IsoParams iso;
    HarnessConfig harness;

    /// Mandatory; the only source of solver randomness.
    std::optional<std::uint64_t> master_seed;
    std::filesystem::path output_dir{"past_out"};
    int workers{1};
    double histogram_bin_width{100.0};

    void validate() const {
        if (generate_seed.has_value() == !scenario_dir.empty())
            throw ConfigError("scenes: set exactly one of generate_seed and scenario_dir");
        if (generate_seed && scene_count < 1) throw ConfigError("scene_count must be >= 1");
        if (!master_seed) throw ConfigError("master_seed is required");
        if (solvers.empty()) throw ConfigError("solvers must be nonempty");
        for (const auto& s : solvers)
            if (s != "past" && s != "mc" && s != "iso") throw ConfigError("unknown solver '" + s + "'");
        if (mc_iterations < 0) throw ConfigError("mc_iterations must be >= 0");
        if (workers < 1) throw ConfigError("workers must be >= 1");
        if (!(histogram_bin_width > 0)) throw ConfigError("histogram_bin_width must be > 0");
        harness.validate();
    }
};

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    if (c.generate_seed) {
        j["generate_seed"] = *c.generate_seed;
        j["scene_count"] = c.scene_count;
        j["vehicle_count"] = c.scene.vehicle_count;
        j["duration"] = c.scene.duration;
        j["frame_rate"] = c.scene.frame_rate;
        j["ego_speed"] = c.scene.ego_speed;
    } else {
        j["scenario_dir"] = c.scenario_dir.string();
    }
    j["solvers"] = c.solvers;
    j["mcts"] = {{"iterations", c.mcts.iterations},
                 {"exploration", c.mcts.exploration},
                 {"normalize_values", c.mcts.normalize_values},
                 {"k_action", c.mcts.k_action},
                 {"alpha_action", c.mcts.alpha_action}};
    j["mc_iterations"] = c.mc_iterations;
    j["iso"] = {{"budget", c.iso.budget}, {"batch", c.iso.batch}};
    const auto& h = c.harness;
    j["harness"] = {{"mode", to_string(h.mode)},
                    {"disturbance", to_string(h.disturbance)},
                    {"rate_set", h.rain.rate_set},
                    {"extinction_coeff_scale", h.rain.extinction_coeff_scale},
                    {"scatter_coeff", h.rain.scatter_coeff},
                    {"noise_scale", h.rain.noise_scale},
                    {"standardized_density", h.rain.standardized_density},
                    {"theta", h.theta},
                    {"target_vehicle", h.target_vehicle},
                    {"position_error_threshold", h.position_error_threshold},
                    {"lost_frames", h.lost_frames},
                    {"fde_threshold", h.fde_threshold},
                    {"min_prediction_history", h.min_prediction_history},
                    {"alpha", h.alpha},
                    {"horizon", h.horizon},
                    {"speed_multipliers", h.predictor.speed_multipliers},
                    {"turn_rates", h.predictor.turn_rates},
                    {"prediction_horizon", h.predictor.horizon}};
    j["master_seed"] = c.master_seed.value_or(0);
    j["workers"] = c.workers;
    j["histogram_bin_width"] = c.histogram_bin_width;
    return j;
}

/// Scene k of a generated set.
inline Scenario generated_scene(const RunConfig& c, int k) {
    ScenarioConfig sc = c.scene;
    char id[32];
    std::snprintf(id, sizeof id, "scene_%03d", k);
    sc.scenario_id = id;
    return generate_scenario(sc, rng::derive(*c.generate_seed, static_cast<std::uint64_t>(k)));
}

/// Scenario files of a directory (*.json), in file-name order.
inline std::vector<std::filesystem::path> scenario_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("scenario_dir '" + dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("scenario_dir '" + dir.string() + "' holds no .json scenarios");
    return files;
}

inline int scene_total(const RunConfig& c) {
    return c.generate_seed ? c.scene_count : static_cast<int>(scenario_files(c.scenario_dir).size());
}

inline Scenario load_scene(const RunConfig& c, int k) {
    return c.generate_seed ? generated_scene(c, k) : read_scenario(scenario_files(c.scenario_dir).at(k));
}

/// Per-scene solver seed; every solver on a scene shares it.
inline std::uint64_t scene_seed(const RunConfig& c, int k) {
    return rng::derive(*c.master_seed, 0x5eedULL + static_cast<std::uint64_t>(k));
}

inline SceneResult run_solver(const PerceptionHarness& h, const RunConfig& c, const std::string& solver,
                              std::uint64_t seed) {
    SceneResult r;
    r.scenario_id = h.scenario().scenario_id;
    r.solver = solver;
    r.master_seed = seed;
    if (solver == "past") {
        r.params = {{"iterations", c.mcts.iterations},
                    {"exploration", c.mcts.exploration},
                    {"normalize_values", c.mcts.normalize_values},
                    {"k_action", c.mcts.k_action},
                    {"alpha_action", c.mcts.alpha_action}};
        r.search = mcts_dpw_search(h, c.mcts, seed);
    } else if (solver == "mc") {
        r.params = {{"iterations", c.mc_iterations}};
        r.search = mc_search(h, c.mc_iterations, seed);
    } else {
        r.params = {{"budget", c.iso.budget}, {"batch", c.iso.batch}};
        r.search = iso_attack(h, c.iso).search;
    }
    return r;
}

struct BenchmarkRun {
    /// Scene-major, solvers in configured order.
    std::vector<SceneResult> results;
    BenchmarkSummary summary;
    int scene_errors{0};
};

/// Runs every solver on every scene. Output is independent of the worker count.
inline BenchmarkRun run_benchmark(const RunConfig& config) {
    config.validate();
    const int n = scene_total(config);
    const std::size_t per = config.solvers.size();
    std::vector<SceneResult> results(static_cast<std::size_t>(n) * per);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int k = next++; k < n; k = next++) {
            const std::uint64_t seed = scene_seed(config, k);
            std::shared_ptr<const Scenario> scene;
            std::unique_ptr<PerceptionHarness> h;
            std::string setup_error;
            try {
                scene = std::make_shared<const Scenario>(load_scene(config, k));
                h = std::make_unique<PerceptionHarness>(scene, config.harness);
            } catch (const std::exception& e) {
                setup_error = e.what();
            }
            for (std::size_t s = 0; s < per; ++s) {
                auto& slot = results[static_cast<std::size_t>(k) * per + s];
                if (!h) {
                    slot.scenario_id = scene ? scene->scenario_id : "scene#" + std::to_string(k);
                    slot.solver = config.solvers[s];
                    slot.master_seed = seed;
                    slot.error = setup_error;
                    continue;
                }
                try {
                    slot = run_solver(*h, config, config.solvers[s], seed);
                } catch (const std::exception& e) {
                    slot.scenario_id = scene->scenario_id;
                    slot.solver = config.solvers[s];
                    slot.master_seed = seed;
                    slot.error = e.what();
                }
            }
        }
    };
    const int threads = std::min(config.workers, n);
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    BenchmarkRun run;
    run.results = std::move(results);
    for (const auto& r : run.results) run.scene_errors += !r.error.empty();
    run.summary = summarize(run.results, config.histogram_bin_width);
    return run;
}

/// Output directory after applying the environment override.
inline std::filesystem::path resolved_output_dir(const RunConfig& c) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return c.output_dir;
}

/// Writes scenes/<scenario_id>.<solver>.json, summary.csv, summary.json and histogram.json.
inline void write_outputs(const BenchmarkRun& run, const RunConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "scenes");
    for (const auto& r : run.results)
        write_json_file(scene_result_to_json(r), dir / "scenes" / (r.scenario_id + "." + r.solver + ".json"));
    {
        std::ofstream csv(dir / "summary.csv", std::ios::binary);
        if (!csv) throw ConfigError("cannot write " + (dir / "summary.csv").string());
        csv << summary_csv(run.summary);
    }
    nlohmann::json summary = summary_json(run.summary);
    summary["config"] = run_config_to_json(config);
    summary["scene_errors"] = run.scene_errors;
    write_json_file(summary, dir / "summary.json");
    nlohmann::json hist = histogram_json(run.summary.histogram);
    hist["config"] = run_config_to_json(config);
    write_json_file(hist, dir / "histogram.json");
}

/// Loads every per-scene result file of a run directory, in file-name order.
inline std::vector<SceneResult> read_scene_results(const std::filesystem::path& dir) {
    const auto scenes = dir / "scenes";
    if (!std::filesystem::is_directory(scenes)) throw ConfigError("'" + scenes.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(scenes))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<SceneResult> out;
    for (const auto& f : files) out.push_back(scene_result_from_json(read_json_file(f)));
    return out;
}

struct ReplayCheck {
    bool match{false};
    std::vector<std::string> differences;
};

/// Replays a record and compares failure kind, step, vehicle and log-likelihood.
inline ReplayCheck check_replay(const FailureRecord& record, const PerceptionHarness& h) {
    ReplayCheck out;
    const SimState s = h.replay(record);
    if (!s.failure) {
        out.differences.push_back("replay reaches no failure");
        return out;
    }
    const auto& f = *s.failure;
    auto diff = [&](const std::string& field, const std::string& got, const std::string& want) {
        if (got != want) out.differences.push_back(field + ": recorded " + want + ", replayed " + got);
    };
    auto num = [](double v) {
        char b[64];
        std::snprintf(b, sizeof b, "%.17g", v);
        return std::string(b);
    };
    diff("kind", to_string(f.kind), to_string(record.kind));
    diff("step", std::to_string(f.step), std::to_string(record.step));
    diff("vehicle_id", f.vehicle_id, record.vehicle_id);
    diff("log_likelihood", num(f.log_likelihood), num(record.log_likelihood));
    out.match = out.differences.empty();
    return out;
}

}  // namespace past
