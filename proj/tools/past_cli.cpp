// past_cli: generate scene sets, run solvers over them, replay failures and rebuild reports.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 replay mismatch or integrity error,
// 3 run finished but some scene/solver pairs failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "past/past.hpp"

namespace fs = std::filesystem;
using namespace past;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitMismatch = 2;
constexpr int kExitPartial = 3;

// Raw option values. Options live on the top-level app so that a config file with flat keys
// applies to every subcommand; command-line flags override the file.
struct Options {
    std::uint64_t generate_seed{0};
    std::string scenario_dir;
    std::uint64_t master_seed{0};
    std::string mode{"tracking_and_prediction"};
    std::string disturbance{"rain"};
    std::string output_dir{"past_out"};
    CLI::Option* generate_seed_opt{nullptr};
    CLI::Option* scenario_dir_opt{nullptr};
    CLI::Option* master_seed_opt{nullptr};
};

// Registers "--a-b" with the alias "--a_b" so config files can use either spelling.
std::string names(const std::string& dashed) {
    std::string under = dashed;
    for (char& c : under)
        if (c == '-') c = '_';
    return under == dashed ? "--" + dashed : "--" + dashed + ",--" + under;
}

void add_config_options(CLI::App& app, Options& o, RunConfig& c) {
    app.set_config("--config", "", "INI or TOML file with flat option keys (command-line flags win)");
    auto* scenes = app.add_option_group("scenes", "Scene source");
    o.generate_seed_opt = scenes->add_option(names("generate-seed"), o.generate_seed, "Generate scenes from this seed");
    o.scenario_dir_opt = scenes->add_option(names("scenario-dir"), o.scenario_dir, "Read scenario files from this directory");
    scenes->add_option(names("scene-count"), c.scene_count, "Number of generated scenes")->capture_default_str();
    scenes->add_option(names("vehicle-count"), c.scene.vehicle_count, "Vehicles per generated scene")->capture_default_str();
    scenes->add_option(names("duration"), c.scene.duration, "Generated scene length (s)")->capture_default_str();
    scenes->add_option(names("frame-rate"), c.scene.frame_rate, "Generated frame rate (Hz)")->capture_default_str();
    scenes->add_option(names("ego-speed"), c.scene.ego_speed, "Generated ego speed (m/s)")->capture_default_str();

    auto* solve = app.add_option_group("solvers", "Solvers");
    solve->add_option(names("solvers"), c.solvers, "Comma-separated subset of past, mc, iso")->delimiter(',')->capture_default_str();
    solve->add_option(names("iterations"), c.mcts.iterations, "MCTS iterations")->capture_default_str();
    solve->add_option(names("exploration"), c.mcts.exploration, "MCTS exploration constant")->capture_default_str();
    solve->add_option(names("normalize-values"), c.mcts.normalize_values,
                      "Rescale MCTS values to [0, 1] before the exploration bonus (true/false)")
        ->capture_default_str();
    solve->add_option(names("k-action"), c.mcts.k_action, "Widening coefficient k")->capture_default_str();
    solve->add_option(names("alpha-action"), c.mcts.alpha_action, "Widening exponent")->capture_default_str();
    solve->add_option(names("mc-iterations"), c.mc_iterations, "Random rollouts of the mc baseline")->capture_default_str();
    solve->add_option(names("iso-budget"), c.iso.budget, "ISO iterations per frame")->capture_default_str();
    solve->add_option(names("iso-batch"), c.iso.batch, "ISO points removed per iteration")->capture_default_str();

    auto* h = app.add_option_group("harness", "Disturbances and failure criteria");
    h->add_option(names("mode"), o.mode, "tracking_and_prediction, prediction_only or single_target")->capture_default_str();
    h->add_option(names("disturbance"), o.disturbance, "rain or bernoulli")->capture_default_str();
    h->add_option(names("rates"), c.harness.rain.rate_set, "Rain rates (mm/h), comma-separated")->delimiter(',')->capture_default_str();
    h->add_option(names("theta"), c.harness.theta, "Bernoulli removal probability")->capture_default_str();
    h->add_option(names("target-vehicle"), c.harness.target_vehicle, "Vehicle id for single_target / bernoulli");
    h->add_option(names("position-error-threshold"), c.harness.position_error_threshold, "Track error threshold (m)")->capture_default_str();
    h->add_option(names("lost-frames"), c.harness.lost_frames, "Consecutive misses that count as a lost track")->capture_default_str();
    h->add_option(names("fde-threshold"), c.harness.fde_threshold, "Prediction FDE threshold (m)")->capture_default_str();
    h->add_option(names("min-prediction-history"), c.harness.min_prediction_history, "Track history before predictions are scored")->capture_default_str();
    h->add_option(names("alpha"), c.harness.alpha, "Penalty for episodes that end without failure")->capture_default_str();
    h->add_option(names("horizon"), c.harness.horizon, "Episode length in frames (0: whole scene)")->capture_default_str();

    auto* run = app.add_option_group("run", "Run");
    o.master_seed_opt = run->add_option(names("master-seed"), o.master_seed, "Seed for all solver randomness (required)");
    run->add_option(names("output-dir"), o.output_dir, std::string("Output directory (overridden by ") + kOutputDirEnv + ")")->capture_default_str();
    run->add_option(names("workers"), c.workers, "Worker threads")->capture_default_str();
    run->add_option(names("bin-width"), c.histogram_bin_width, "Log-likelihood histogram bin width")->capture_default_str();
}

// Copies the raw options into `c`. The master seed is checked by the commands that need it.
void resolve(const Options& o, RunConfig& c) {
    if (o.generate_seed_opt->count()) c.generate_seed = o.generate_seed;
    if (o.scenario_dir_opt->count()) c.scenario_dir = o.scenario_dir;
    if (o.master_seed_opt->count()) c.master_seed = o.master_seed;
    c.harness.mode = criteria_mode_from_string(o.mode);
    c.harness.disturbance = disturbance_kind_from_string(o.disturbance);
    c.output_dir = o.output_dir;
}

// Finds the scenario a record belongs to in the configured scene source.
Scenario scenario_for(const RunConfig& c, const std::string& scenario_id) {
    if (c.generate_seed.has_value() == !c.scenario_dir.empty())
        throw ConfigError("replay: give --scenario, or exactly one of --generate-seed and --scenario-dir");
    if (c.generate_seed) {
        for (int k = 0; k < c.scene_count; ++k) {
            char id[32];
            std::snprintf(id, sizeof id, "scene_%03d", k);
            if (scenario_id == id) return generated_scene(c, k);
        }
    } else {
        for (const auto& f : scenario_files(c.scenario_dir)) {
            Scenario s = read_scenario(f);
            if (s.scenario_id == scenario_id) return s;
        }
    }
    throw IntegrityError("scenario '" + scenario_id + "' is not in the configured scene source");
}

int cmd_generate(RunConfig& c, const std::string& out) {
    if (!c.generate_seed) throw ConfigError("generate: --generate-seed is required");
    if (c.scene_count < 1) throw ConfigError("generate: --scene-count must be >= 1");
    fs::create_directories(out);
    for (int k = 0; k < c.scene_count; ++k) {
        const Scenario s = generated_scene(c, k);
        write_scenario(s, fs::path(out) / (s.scenario_id + ".json"));
    }
    std::cout << "wrote " << c.scene_count << " scenarios to " << out << "\n";
    return kExitOk;
}

int cmd_run(RunConfig& c) {
    c.validate();
    const fs::path dir = resolved_output_dir(c);
    const BenchmarkRun run = run_benchmark(c);
    write_outputs(run, c, dir);
    std::cout << summary_csv(run.summary);
    std::cout << "results in " << dir.string() << "\n";
    if (run.scene_errors > 0) {
        for (const auto& r : run.results)
            if (!r.error.empty()) std::cerr << r.scenario_id << " [" << r.solver << "]: " << r.error << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_replay(RunConfig& c, const std::string& record_path, const std::string& scenario_path) {
    c.harness.validate();
    const nlohmann::json j = read_json_file(record_path);
    FailureRecord record;
    if (j.contains("failure")) {
        const SceneResult r = scene_result_from_json(j);
        if (!r.search.best_failure) throw ConfigError("replay: '" + record_path + "' holds no failure");
        record = *r.search.best_failure;
    } else {
        record = record_from_json(j);
    }
    auto scene = std::make_shared<const Scenario>(scenario_path.empty() ? scenario_for(c, record.scenario_id)
                                                                        : read_scenario(scenario_path));
    const PerceptionHarness h(scene, c.harness);
    const ReplayCheck check = check_replay(record, h);
    if (check.match) {
        std::cout << "match: " << to_string(record.kind) << " of " << record.vehicle_id << " at step "
                  << record.step << ", log-likelihood " << record.log_likelihood << "\n";
        return kExitOk;
    }
    std::cout << "mismatch for " << record.scenario_id << "\n";
    for (const auto& d : check.differences) std::cout << "  " << d << "\n";
    return kExitMismatch;
}

int cmd_report(RunConfig& c, const std::string& run_dir, std::string out, bool verify) {
    if (!(c.histogram_bin_width > 0)) throw ConfigError("--bin-width must be > 0");
    const auto results = read_scene_results(run_dir);
    if (results.empty()) throw ConfigError("report: no scene results under " + run_dir);
    if (verify) {
        c.harness.validate();
        for (const auto& r : results) {
            if (!r.search.best_failure) continue;
            auto scene = std::make_shared<const Scenario>(scenario_for(c, r.scenario_id));
            const PerceptionHarness h(scene, c.harness);
            const auto& f = *r.search.best_failure;
            const FailureMetrics m = compute_metrics(f, h);
            if (m != FailureMetrics{f.delta, f.Delta, f.trajectory_length})
                throw IntegrityError(r.scenario_id + " [" + r.solver + "]: recorded metrics differ from replay");
        }
        std::cout << "verified " << results.size() << " scene results by replay\n";
    }
    const BenchmarkSummary s = summarize(results, c.histogram_bin_width);
    if (out.empty()) out = run_dir;
    fs::create_directories(out);
    {
        std::ofstream csv(fs::path(out) / "summary.csv", std::ios::binary);
        csv << summary_csv(s);
    }
    write_json_file(histogram_json(s.histogram), fs::path(out) / "histogram.json");
    nlohmann::json sj = summary_json(s);
    if (fs::exists(fs::path(run_dir) / "summary.json")) {
        const nlohmann::json prev = read_json_file(fs::path(run_dir) / "summary.json");
        if (prev.contains("config")) sj["config"] = prev["config"];
    }
    write_json_file(sj, fs::path(out) / "summary.json");
    std::cout << summary_csv(s);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stress testing of a LiDAR perception pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    RunConfig c;
    add_config_options(app, o, c);

    auto* gen = app.add_subcommand("generate", "Write a generated scene set as scenario files");
    std::string gen_out = "scenarios";
    gen->add_option("--out", gen_out, "Directory for the scenario files")->capture_default_str();

    app.add_subcommand("run", "Run the solvers over a scene set and write results");

    auto* replay = app.add_subcommand("replay", "Replay a failure record and compare the outcome");
    std::string record_path, scenario_path;
    replay->add_option("record", record_path, "Failure record or per-scene result file")->required()->check(CLI::ExistingFile);
    replay->add_option("--scenario", scenario_path, "Scenario file (default: look up in the scene source)")->check(CLI::ExistingFile);

    auto* report = app.add_subcommand("report", "Rebuild summary.csv and histogram.json from a run directory");
    std::string run_dir, report_out;
    bool verify = false;
    report->add_option("run_dir", run_dir, "Directory written by run")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", report_out, "Output directory (default: the run directory)");
    report->add_flag("--verify", verify, "Replay every failure and check its recorded metrics");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        resolve(o, c);
        if (gen->parsed()) return cmd_generate(c, gen_out);
        if (app.got_subcommand("run")) return cmd_run(c);
        if (replay->parsed()) return cmd_replay(c, record_path, scenario_path);
        return cmd_report(c, run_dir, report_out, verify);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return kExitMismatch;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
