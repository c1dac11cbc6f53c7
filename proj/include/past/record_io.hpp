#pragma once

// JSON for failure records and search results. A record carries its full action sequence (or
// the explicit removals of the adversarial baseline) so it can be replayed.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "past/errors.hpp"
#include "past/harness.hpp"
#include "past/scenario_io.hpp"
#include "past/search.hpp"

namespace past {

inline constexpr int kRecordFormatVersion = 1;

inline nlohmann::json action_to_json(const DisturbanceAction& a) {
    nlohmann::json j;
    if (const auto* b = std::get_if<BernoulliModel>(&a.model)) {
        j["model"] = "bernoulli";
        j["theta"] = b->theta;
    } else {
        j["model"] = "rain";
        j["rate"] = std::get<RainModel>(a.model).rate;
    }
    j["seed"] = a.seed;
    return j;
}

inline DisturbanceAction action_from_json(const nlohmann::json& j, const std::string& path) {
    const auto& model = detail::require(j, "model", path);
    const auto& seed = detail::require(j, "seed", path);
    if (!seed.is_number_unsigned()) throw ParseError(path + "/seed", -1, "expected an unsigned integer");
    DisturbanceAction a;
    a.seed = seed.get<std::uint64_t>();
    if (model == "bernoulli") a.model = BernoulliModel{detail::number_at(j, "theta", path)};
    else if (model == "rain") a.model = RainModel{detail::number_at(j, "rate", path)};
    else throw ParseError(path + "/model", -1, "expected \"bernoulli\" or \"rain\"");
    return a;
}

inline nlohmann::json record_to_json(const FailureRecord& r) {
    nlohmann::json j;
    j["version"] = kRecordFormatVersion;
    j["scenario_id"] = r.scenario_id;
    j["kind"] = to_string(r.kind);
    j["step"] = r.step;
    j["vehicle_id"] = r.vehicle_id;
    j["log_likelihood"] = r.log_likelihood;
    j["delta"] = r.delta;
    j["Delta"] = r.Delta;
    j["trajectory_length"] = r.trajectory_length;
    j["value"] = r.value;
    auto& actions = j["actions"] = nlohmann::json::array();
    for (const auto& a : r.actions) actions.push_back(action_to_json(a));
    if (!r.removals.empty()) j["removals"] = r.removals;
    return j;
}

inline FailureRecord record_from_json(const nlohmann::json& j, const std::string& path = "") {
    const auto& version = detail::require(j, "version", path);
    if (version != kRecordFormatVersion)
        throw ParseError(path + "/version", -1, "unsupported record version " + version.dump());
    auto text = [&](const char* key) {
        const auto& v = detail::require(j, key, path);
        if (!v.is_string()) throw ParseError(path + "/" + key, -1, "expected a string");
        return v.get<std::string>();
    };
    auto integer = [&](const char* key) {
        const auto& v = detail::require(j, key, path);
        if (!v.is_number_integer()) throw ParseError(path + "/" + key, -1, "expected an integer");
        return v.get<int>();
    };
    FailureRecord r;
    r.scenario_id = text("scenario_id");
    try {
        r.kind = failure_kind_from_string(text("kind"));
    } catch (const ConfigError& e) {
        throw ParseError(path + "/kind", -1, e.what());
    }
    r.step = integer("step");
    r.vehicle_id = text("vehicle_id");
    r.log_likelihood = detail::number_at(j, "log_likelihood", path);
    r.delta = detail::number_at(j, "delta", path);
    r.Delta = detail::number_at(j, "Delta", path);
    r.trajectory_length = integer("trajectory_length");
    r.value = detail::number_at(j, "value", path);
    const auto& actions = detail::array_at(j, "actions", path);
    for (std::size_t k = 0; k < actions.size(); ++k)
        r.actions.push_back(action_from_json(actions[k], path + "/actions/" + std::to_string(k)));
    if (auto it = j.find("removals"); it != j.end()) {
        if (!it->is_array() || it->size() != r.actions.size())
            throw ParseError(path + "/removals", -1, "expected one index list per action");
        for (std::size_t k = 0; k < it->size(); ++k) {
            const auto& step = (*it)[k];
            const std::string at = path + "/removals/" + std::to_string(k);
            if (!step.is_array()) throw ParseError(at, -1, "expected an array");
            std::vector<std::uint32_t> idx;
            for (const auto& i : step) {
                if (!i.is_number_unsigned()) throw ParseError(at, -1, "expected point indices");
                idx.push_back(i.get<std::uint32_t>());
            }
            r.removals.push_back(std::move(idx));
        }
    }
    return r;
}

/// Solver name, parameters and outcome of one search on one scene.
struct SceneResult {
    std::string scenario_id;
    std::string solver;
    std::uint64_t master_seed{0};
    nlohmann::json params;
    SearchResult<FailureRecord> search;
    /// Set when the solver threw; the scene then counts as not searched.
    std::string error;
};

inline nlohmann::json scene_result_to_json(const SceneResult& r, bool include_wall_time = true) {
    nlohmann::json j;
    j["version"] = kRecordFormatVersion;
    j["scenario_id"] = r.scenario_id;
    j["solver"] = r.solver;
    j["master_seed"] = r.master_seed;
    j["params"] = r.params;
    if (!r.error.empty()) j["error"] = r.error;
    const auto& s = r.search;
    j["best_return"] = std::isfinite(s.best_return) ? nlohmann::json(s.best_return) : nlohmann::json(nullptr);
    j["iterations"] = s.iterations;
    if (include_wall_time) j["wall_time"] = s.wall_time;
    auto& trace = j["trace"] = nlohmann::json::array();
    for (double v : s.trace) trace.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    j["failure"] = s.best_failure ? record_to_json(*s.best_failure) : nlohmann::json(nullptr);
    return j;
}

inline SceneResult scene_result_from_json(const nlohmann::json& j) {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    SceneResult r;
    const auto& id = detail::require(j, "scenario_id", "");
    const auto& solver = detail::require(j, "solver", "");
    if (!id.is_string() || !solver.is_string()) throw ParseError("/scenario_id", -1, "expected strings");
    r.scenario_id = id.get<std::string>();
    r.solver = solver.get<std::string>();
    const auto& seed = detail::require(j, "master_seed", "");
    if (!seed.is_number_unsigned()) throw ParseError("/master_seed", -1, "expected an unsigned integer");
    r.master_seed = seed.get<std::uint64_t>();
    r.params = j.value("params", nlohmann::json::object());
    r.error = j.value("error", "");
    const auto& best = detail::require(j, "best_return", "");
    r.search.best_return = best.is_null() ? ninf : detail::number(best, "/best_return");
    r.search.iterations = j.value("iterations", 0);
    r.search.wall_time = j.value("wall_time", 0.0);
    if (auto it = j.find("trace"); it != j.end() && it->is_array())
        for (const auto& v : *it) r.search.trace.push_back(v.is_null() ? ninf : detail::number(v, "/trace"));
    const auto& f = detail::require(j, "failure", "");
    if (!f.is_null()) r.search.best_failure = record_from_json(f, "/failure");
    return r;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), -1, "cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), -1, e.what());
    }
}

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace past
