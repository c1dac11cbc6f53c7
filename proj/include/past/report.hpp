#pragma once

// Benchmark metrics: per-failure disturbance magnitudes recomputed by replay, per-solver summary
// rows (failure rate, mean and standard error of delta, Delta and trajectory length) and a
// log-likelihood histogram.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "past/errors.hpp"
#include "past/harness.hpp"
#include "past/record_io.hpp"

namespace past {

struct FailureMetrics {
    /// Fraction of the failure vehicle's in-box points removed, mean over disturbed frames.
    double delta{0.0};
    /// Fraction of all points removed, noised or reflected, mean over disturbed frames.
    double Delta{0.0};
    /// Frames in which the failure vehicle had a reported, matched track, up to the failure.
    int trajectory_length{0};
    friend bool operator==(const FailureMetrics&, const FailureMetrics&) = default;
};

/// Replays `record` and recomputes its metrics. Throws IntegrityError when the replay does not
/// reproduce the recorded failure (kind, step, vehicle and log-likelihood).
inline FailureMetrics compute_metrics(const FailureRecord& record, const PerceptionHarness& harness) {
    const SimState s = harness.replay(record);
    if (!s.failure) throw IntegrityError("replay of '" + record.scenario_id + "' reaches no failure");
    const auto& f = *s.failure;
    if (f.kind != record.kind || f.step != record.step || f.vehicle_id != record.vehicle_id)
        throw IntegrityError("replay of '" + record.scenario_id + "' fails differently: " + to_string(f.kind) +
                             " of " + f.vehicle_id + " at step " + std::to_string(f.step) + ", recorded " +
                             to_string(record.kind) + " of " + record.vehicle_id + " at step " +
                             std::to_string(record.step));
    if (f.log_likelihood != record.log_likelihood)
        throw IntegrityError("replay of '" + record.scenario_id + "' log-likelihood differs");
    return {f.delta, f.Delta, f.trajectory_length};
}

/// Mean and standard error (sample standard deviation / sqrt(n)). Values are summed in sorted
/// order so the result does not depend on input order.
struct MeanSe {
    double mean{0.0};
    double se{0.0};
};

inline MeanSe mean_se(std::vector<double> v) {
    if (v.empty()) return {};
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double n = static_cast<double>(v.size());
    const double mean = sum / n;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

struct SummaryRow {
    std::string solver;
    int scenes{0};
    int failures{0};
    /// Scenes whose search threw; excluded from the failure rate.
    int errors{0};
    double failure_rate_pct{0.0};
    MeanSe delta_pct;
    MeanSe Delta_pct;
    MeanSe trajectory_length;
    MeanSe log_likelihood;
    /// Fewer than two failing scenes: standard errors are reported as 0.
    bool small_sample{false};
};

struct Histogram {
    double bin_width{100.0};
    /// Per solver: bin index (floor(log-likelihood / bin_width)) -> count.
    std::map<std::string, std::map<long, int>> counts;
};

struct BenchmarkSummary {
    std::vector<SummaryRow> rows;
    Histogram histogram;
};

namespace detail {

inline int solver_rank(const std::string& s) {
    if (s == "past") return 0;
    if (s == "mc") return 1;
    if (s == "iso") return 2;
    return 3;
}

}  // namespace detail

/// Aggregates per-scene results into one row per solver (past, mc, iso, then others by name).
inline BenchmarkSummary summarize(const std::vector<SceneResult>& results, double bin_width = 100.0) {
    if (!(bin_width > 0)) throw ConfigError("histogram bin width must be > 0");
    std::map<std::string, std::vector<const SceneResult*>> by_solver;
    for (const auto& r : results) by_solver[r.solver].push_back(&r);
    BenchmarkSummary out;
    out.histogram.bin_width = bin_width;
    for (const auto& [solver, rs] : by_solver) {
        SummaryRow row;
        row.solver = solver;
        std::vector<double> delta, Delta, len, ll;
        for (const auto* r : rs) {
            if (!r->error.empty()) {
                ++row.errors;
                continue;
            }
            ++row.scenes;
            if (!r->search.best_failure) continue;
            const auto& f = *r->search.best_failure;
            ++row.failures;
            delta.push_back(100.0 * f.delta);
            Delta.push_back(100.0 * f.Delta);
            len.push_back(f.trajectory_length);
            ll.push_back(f.log_likelihood);
            ++out.histogram.counts[solver][static_cast<long>(std::floor(f.log_likelihood / bin_width))];
        }
        row.failure_rate_pct = row.scenes ? 100.0 * row.failures / row.scenes : 0.0;
        row.delta_pct = mean_se(delta);
        row.Delta_pct = mean_se(Delta);
        row.trajectory_length = mean_se(len);
        row.log_likelihood = mean_se(ll);
        row.small_sample = row.failures < 2;
        out.rows.push_back(std::move(row));
    }
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
        return detail::solver_rank(a.solver) < detail::solver_rank(b.solver);
    });
    return out;
}

inline std::string summary_csv(const BenchmarkSummary& s) {
    std::string out = "solver,failure_rate_pct,delta_mean,delta_se,Delta_mean,Delta_se,trajlen_mean,trajlen_se\n";
    char line[512];
    for (const auto& r : s.rows) {
        std::snprintf(line, sizeof line, "%s,%.4f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.solver.c_str(),
                      r.failure_rate_pct, r.delta_pct.mean, r.delta_pct.se, r.Delta_pct.mean, r.Delta_pct.se,
                      r.trajectory_length.mean, r.trajectory_length.se);
        out += line;
    }
    return out;
}

inline nlohmann::json histogram_json(const Histogram& h) {
    nlohmann::json j;
    j["bin_width"] = h.bin_width;
    j["quantity"] = "failure log-likelihood";
    auto& solvers = j["solvers"] = nlohmann::json::object();
    for (const auto& [solver, bins] : h.counts) {
        auto& arr = solvers[solver] = nlohmann::json::array();
        for (const auto& [bin, count] : bins)
            arr.push_back({{"lo", bin * h.bin_width}, {"hi", (bin + 1) * h.bin_width}, {"count", count}});
    }
    return j;
}

inline nlohmann::json summary_json(const BenchmarkSummary& s) {
    nlohmann::json j;
    j["aggregation"] = "delta and Delta are means over frames where any point was disturbed; "
                       "standard errors are over failing scenes";
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : s.rows) {
        auto ms = [](const MeanSe& m) { return nlohmann::json{{"mean", m.mean}, {"se", m.se}}; };
        rows.push_back({{"solver", r.solver},
                        {"scenes", r.scenes},
                        {"failures", r.failures},
                        {"errors", r.errors},
                        {"failure_rate_pct", r.failure_rate_pct},
                        {"delta_pct", ms(r.delta_pct)},
                        {"Delta_pct", ms(r.Delta_pct)},
                        {"trajectory_length", ms(r.trajectory_length)},
                        {"log_likelihood", ms(r.log_likelihood)},
                        {"small_sample", r.small_sample}});
    }
    return j;
}

}  // namespace past
