#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "past/record_io.hpp"
#include "past/report.hpp"
#include "past/search.hpp"

using namespace past;

namespace {

SceneResult result(const std::string& solver, int scene, std::optional<FailureRecord> f) {
    SceneResult r;
    r.scenario_id = "scene_" + std::to_string(scene);
    r.solver = solver;
    r.search.best_failure = std::move(f);
    return r;
}

FailureRecord failure(double delta, double Delta, int len, double ll) {
    FailureRecord f;
    f.delta = delta;
    f.Delta = Delta;
    f.trajectory_length = len;
    f.log_likelihood = ll;
    return f;
}

std::shared_ptr<const Scenario> single_vehicle_scene() {
    ScenarioConfig cfg;
    cfg.scenario_id = "single";
    // Long enough for prediction failures: the FDE needs 6 s of future truth.
    cfg.duration = 12.0;
    cfg.ego_speed = 3.0;
    VehicleSpec v;
    v.motion = MotionTemplate::straight;
    v.x0 = 22.0;
    v.y0 = 3.5;
    v.speed = 3.0;
    cfg.vehicles = {v};
    return std::make_shared<const Scenario>(generate_scenario(cfg, 7));
}

HarnessConfig single_target() {
    HarnessConfig hc;
    hc.mode = CriteriaMode::single_target;
    hc.disturbance = DisturbanceKind::bernoulli;
    hc.target_vehicle = "veh_0";
    return hc;
}

}  // namespace

TEST(MeanSe, HandComputedValues) {
    const auto m = mean_se({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
    EXPECT_EQ(mean_se({7, 7, 7}).se, 0.0);
    EXPECT_EQ(mean_se({3}).se, 0.0);
    EXPECT_EQ(mean_se({}).mean, 0.0);
}

TEST(Summarize, FailureRateAndRowOrder) {
    std::vector<SceneResult> rs;
    for (int k = 0; k < 10; ++k) {
        rs.push_back(result("mc", k, k % 2 ? std::optional(failure(0.1, 0.2, 5, -100)) : std::nullopt));
        rs.push_back(result("past", k, failure(0.1, 0.2, 5, -100)));
    }
    const auto s = summarize(rs);
    ASSERT_EQ(s.rows.size(), 2u);
    EXPECT_EQ(s.rows[0].solver, "past");
    EXPECT_EQ(s.rows[1].solver, "mc");
    EXPECT_DOUBLE_EQ(s.rows[0].failure_rate_pct, 100.0);
    EXPECT_DOUBLE_EQ(s.rows[1].failure_rate_pct, 50.0);
    EXPECT_EQ(s.rows[1].delta_pct.se, 0.0);
    EXPECT_DOUBLE_EQ(s.rows[1].delta_pct.mean, 10.0);
    EXPECT_FALSE(s.rows[1].small_sample);
}

TEST(Summarize, SingleFailureIsFlaggedSmallSample) {
    const auto s = summarize({result("past", 0, failure(0.3, 0.1, 2, -50)), result("past", 1, std::nullopt)});
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_TRUE(s.rows[0].small_sample);
    EXPECT_EQ(s.rows[0].delta_pct.se, 0.0);
    EXPECT_DOUBLE_EQ(s.rows[0].delta_pct.mean, 30.0);
}

TEST(Summarize, ErroredScenesExcludedFromRate) {
    auto err = result("past", 2, std::nullopt);
    err.error = "boom";
    const auto s = summarize({result("past", 0, failure(0.1, 0.1, 1, -1)), result("past", 1, std::nullopt), err});
    EXPECT_EQ(s.rows[0].errors, 1);
    EXPECT_EQ(s.rows[0].scenes, 2);
    EXPECT_DOUBLE_EQ(s.rows[0].failure_rate_pct, 50.0);
}

TEST(Summarize, PermutationInvariantAndHistogramSumsToFailures) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<SceneResult> rs;
    for (int k = 0; k < 40; ++k) {
        const std::string solver = k % 3 == 0 ? "iso" : k % 3 == 1 ? "mc" : "past";
        std::optional<FailureRecord> f;
        if (u(gen) < 0.7) f = failure(u(gen), u(gen), 1 + static_cast<int>(u(gen) * 10), -1000 * u(gen));
        rs.push_back(result(solver, k, f));
    }
    const auto a = summarize(rs, 50.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(rs.begin(), rs.end(), gen);
        const auto b = summarize(rs, 50.0);
        EXPECT_EQ(summary_csv(a), summary_csv(b));
        EXPECT_EQ(histogram_json(a.histogram), histogram_json(b.histogram));
    }
    for (const auto& row : a.rows) {
        int sum = 0;
        if (auto it = a.histogram.counts.find(row.solver); it != a.histogram.counts.end())
            for (const auto& [bin, n] : it->second) sum += n;
        EXPECT_EQ(sum, row.failures);
        EXPECT_GE(row.failure_rate_pct, 0.0);
        EXPECT_LE(row.failure_rate_pct, 100.0);
    }
}

TEST(Summarize, HistogramBinsAreFloorOfLogLikelihood) {
    const auto s = summarize({result("past", 0, failure(0, 0, 1, -150.0)), result("past", 1, failure(0, 0, 1, -200.0)),
                              result("past", 2, failure(0, 0, 1, -199.0))},
                             100.0);
    const auto& bins = s.histogram.counts.at("past");
    EXPECT_EQ(bins.at(-2), 3);
    const auto j = histogram_json(s.histogram);
    EXPECT_EQ(j["solvers"]["past"][0]["lo"], -200.0);
    EXPECT_EQ(j["solvers"]["past"][0]["hi"], -100.0);
    EXPECT_THROW(summarize({}, 0.0), ConfigError);
}

TEST(SummaryCsv, HeaderAndFormatting) {
    const auto s = summarize({result("past", 0, failure(0.1, 0.05, 5, -10)), result("past", 1, failure(0.3, 0.05, 7, -10))});
    const std::string csv = summary_csv(s);
    EXPECT_EQ(csv,
              "solver,failure_rate_pct,delta_mean,delta_se,Delta_mean,Delta_se,trajlen_mean,trajlen_se\n"
              "past,100.0000,20.000000,10.000000,5.000000,0.000000,6.000000,1.000000\n");
}

TEST(ComputeMetrics, DeltaIsRemovedFractionOfBoxPoints) {
    const PerceptionHarness h(single_vehicle_scene(), single_target());
    // Remove a tenth of the box points in frame 0, nothing afterwards, until the episode ends.
    SimState s = h.initialize();
    const auto& box = h.in_box_points(0, 0);
    const std::size_t n = box.size() / 10;
    s = h.step_with_removals(s, std::vector<std::uint32_t>(box.begin(), box.begin() + n)).first;
    EXPECT_NEAR(static_cast<double>(s.log[0].removed_in_box[0]) / box.size(), static_cast<double>(n) / box.size(), 0);
    const auto& c = s.log[0].counts;
    EXPECT_EQ(c.removed, n);
    EXPECT_EQ(c.noised + c.reflected, 0u);
}

TEST(ComputeMetrics, RecomputedMetricsEqualRecorded) {
    const PerceptionHarness h(single_vehicle_scene(), single_target());
    const auto iso = iso_attack(h);
    std::vector<FailureRecord> records;
    if (iso.search.best_failure) records.push_back(*iso.search.best_failure);
    const auto mcts = mcts_dpw_search(h, MctsParams{.iterations = 100}, 1);
    if (mcts.best_failure) records.push_back(*mcts.best_failure);
    ASSERT_FALSE(records.empty());
    for (const auto& f : records) {
        const FailureMetrics m = compute_metrics(f, h);
        EXPECT_EQ(m, (FailureMetrics{f.delta, f.Delta, f.trajectory_length}));
        EXPECT_GE(m.delta, 0.0);
        EXPECT_LE(m.delta, 1.0);
        EXPECT_LE(m.trajectory_length, f.step + 1);
        // Independent recomputation from the replayed step log.
        const SimState s = h.replay(f);
        double local = 0, global = 0;
        int nl = 0, ng = 0;
        for (std::size_t k = 0; k < s.log.size(); ++k) {
            const auto& l = s.log[k];
            const auto moved = l.counts.removed + l.counts.noised + l.counts.reflected;
            if (moved == 0) continue;
            global += static_cast<double>(moved) / static_cast<double>(l.total_points);
            ++ng;
            local += static_cast<double>(l.removed_in_box[0]) / static_cast<double>(h.in_box_points(static_cast<int>(k), 0).size());
            ++nl;
        }
        EXPECT_NEAR(m.delta, nl ? local / nl : 0.0, 1e-12);
        EXPECT_NEAR(m.Delta, ng ? global / ng : 0.0, 1e-12);
    }
}

TEST(ComputeMetrics, TamperedRecordIsIntegrityError) {
    const PerceptionHarness h(single_vehicle_scene(), single_target());
    const auto r = mcts_dpw_search(h, MctsParams{.iterations = 100}, 1);
    ASSERT_TRUE(r.best_failure);
    auto bad = *r.best_failure;
    bad.actions.back().seed ^= 1;
    EXPECT_THROW(compute_metrics(bad, h), IntegrityError);
    auto wrong = *r.best_failure;
    wrong.scenario_id = "other";
    EXPECT_THROW(compute_metrics(wrong, h), IntegrityError);
}

TEST(RecordIo, RoundTrip) {
    FailureRecord f;
    f.scenario_id = "s";
    f.kind = FailureKind::track_lost;
    f.step = 1;
    f.vehicle_id = "veh_3";
    f.actions = {{RainModel{10.0}, 42}, {BernoulliModel{0.1}, 18446744073709551615ull}};
    f.removals = {{1, 2}, {}};
    f.log_likelihood = -1234.5678901234567;
    f.delta = 0.1;
    f.Delta = 1.0 / 3.0;
    f.trajectory_length = 2;
    f.value = 2;
    EXPECT_EQ(record_from_json(nlohmann::json::parse(record_to_json(f).dump())), f);

    SceneResult r;
    r.scenario_id = "s";
    r.solver = "past";
    r.master_seed = 99;
    r.search.best_failure = f;
    r.search.best_return = f.log_likelihood;
    r.search.trace = {-std::numeric_limits<double>::infinity(), -5.0};
    const auto back = scene_result_from_json(nlohmann::json::parse(scene_result_to_json(r).dump()));
    EXPECT_EQ(back.search.best_failure, r.search.best_failure);
    EXPECT_EQ(back.search.trace, r.search.trace);
    EXPECT_EQ(back.master_seed, 99u);
}

TEST(RecordIo, MalformedRecordsRejected) {
    FailureRecord f;
    f.scenario_id = "s";
    auto j = record_to_json(f);
    j["version"] = 2;
    EXPECT_THROW(record_from_json(j), ParseError);
    j = record_to_json(f);
    j["kind"] = "explosion";
    EXPECT_THROW(record_from_json(j), ParseError);
    j = record_to_json(f);
    j.erase("step");
    EXPECT_THROW(record_from_json(j), ParseError);
    j = record_to_json(f);
    j["actions"] = {{{"model", "fog"}, {"seed", 1}}};
    EXPECT_THROW(record_from_json(j), ParseError);
}
