#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "past/harness.hpp"

using namespace past;

namespace {

std::shared_ptr<const Scenario> random_scene(std::uint64_t seed, double duration = 5.0, int vehicles = 3) {
    ScenarioConfig cfg;
    cfg.scenario_id = "h" + std::to_string(seed);
    cfg.duration = duration;
    cfg.vehicle_count = vehicles;
    return std::make_shared<const Scenario>(generate_scenario(cfg, seed));
}

std::shared_ptr<const Scenario> single_vehicle_scene() {
    ScenarioConfig cfg;
    cfg.scenario_id = "single";
    cfg.duration = 6.0;
    cfg.ego_speed = 3.0;
    VehicleSpec v;
    v.motion = MotionTemplate::straight;
    v.x0 = 22.0;
    v.y0 = 3.5;
    v.speed = 3.0;
    cfg.vehicles = {v};
    return std::make_shared<const Scenario>(generate_scenario(cfg, 7));
}

struct Episode {
    SimState terminal;
    double ret{0.0};
    double ll_sum{0.0};
};

Episode random_episode(const PerceptionHarness& h, std::mt19937_64& gen) {
    Episode e;
    SimState s = h.initialize();
    while (!h.is_terminal(s)) {
        const auto a = h.make_action(gen() % h.model_count(), gen());
        auto [next, ll] = h.step(s, a);
        e.ret += h.reward(s, ll);
        e.ll_sum += ll;
        s = std::move(next);
    }
    e.ret += h.reward(s, 0.0);
    e.terminal = std::move(s);
    return e;
}

}  // namespace

TEST(HarnessConfig, Validation) {
    HarnessConfig c;
    EXPECT_NO_THROW(c.validate());
    c.theta = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.disturbance = DisturbanceKind::bernoulli;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.mode = CriteriaMode::single_target;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.min_prediction_history = 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.rain.rate_set.clear();
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(HarnessConfig, EnumStringsRoundTrip) {
    for (auto k : {FailureKind::track_error, FailureKind::track_lost, FailureKind::prediction_fde})
        EXPECT_EQ(failure_kind_from_string(to_string(k)), k);
    for (auto m : {CriteriaMode::tracking_and_prediction, CriteriaMode::prediction_only, CriteriaMode::single_target})
        EXPECT_EQ(criteria_mode_from_string(to_string(m)), m);
    EXPECT_THROW(criteria_mode_from_string("fast"), ConfigError);
    EXPECT_THROW(disturbance_kind_from_string("snow"), ConfigError);
}

TEST(Harness, UnknownTargetRejected) {
    HarnessConfig c;
    c.mode = CriteriaMode::single_target;
    c.target_vehicle = "veh_9";
    EXPECT_THROW(PerceptionHarness(random_scene(1), c), ConfigError);
}

TEST(Harness, RewardBranches) {
    HarnessConfig c;
    c.horizon = 1;
    const PerceptionHarness h(random_scene(2), c);
    SimState s = h.initialize();
    EXPECT_DOUBLE_EQ(h.reward(s, -7.5), -7.5);
    s.t = 1;
    EXPECT_DOUBLE_EQ(h.reward(s, -7.5), -c.alpha);
    s.failure = FailureRecord{};
    EXPECT_DOUBLE_EQ(h.reward(s, -7.5), 0.0);
}

TEST(Harness, ReturnIdentityOnRandomEpisodes) {
    std::mt19937_64 gen(4);
    int failures = 0;
    // The tight FDE threshold makes failing episodes common.
    HarnessConfig c;
    c.fde_threshold = 4.0;
    for (std::uint64_t sc = 1; sc <= 4; ++sc) {
        const PerceptionHarness h(random_scene(sc, 8.0, 4), sc % 2 ? c : HarnessConfig{});
        for (int ep = 0; ep < 5; ++ep) {
            const Episode e = random_episode(h, gen);
            const double expected = e.terminal.failure ? e.ll_sum : e.ll_sum - h.config().alpha;
            EXPECT_EQ(e.ret, expected);
            EXPECT_EQ(e.terminal.log_likelihood, e.ll_sum);
            if (e.terminal.failure) {
                ++failures;
                EXPECT_EQ(e.terminal.failure->log_likelihood, e.ll_sum);
                EXPECT_EQ(static_cast<int>(e.terminal.failure->actions.size()), e.terminal.failure->step + 1);
            }
        }
    }
    EXPECT_GT(failures, 0);
}

TEST(Harness, StepIsDeterministicAndReplayIsExact) {
    const PerceptionHarness h(random_scene(3), HarnessConfig{});
    std::mt19937_64 gen(8);
    for (int ep = 0; ep < 6; ++ep) {
        const Episode e = random_episode(h, gen);
        if (!e.terminal.failure) continue;
        const SimState r = h.replay(*e.terminal.failure);
        EXPECT_EQ(r, e.terminal);
    }
    const auto a = h.make_action(1, 99);
    EXPECT_EQ(h.step(h.initialize(), a).first, h.step(h.initialize(), a).first);
}

TEST(Harness, ReplayRejectsOtherScenario) {
    const PerceptionHarness h(random_scene(3), HarnessConfig{});
    FailureRecord r;
    r.scenario_id = "elsewhere";
    EXPECT_THROW(h.replay(r), IntegrityError);
}

TEST(Harness, SteppingTerminalStateIsContractViolation) {
    HarnessConfig c;
    c.horizon = 2;
    const PerceptionHarness h(random_scene(5), c);
    SimState s = h.initialize();
    while (!h.is_terminal(s)) s = h.step_with_removals(s, {}).first;
    EXPECT_LE(s.t, 2);
    EXPECT_THROW(h.step(s, h.make_action(0, 1)), ContractViolation);
}

TEST(Harness, UndisturbedEpisodeHasNoUnmaskedFailure) {
    for (std::uint64_t sc = 1; sc <= 6; ++sc) {
        const PerceptionHarness h(random_scene(sc, 8.0, 4), HarnessConfig{});
        SimState s = h.initialize();
        while (!h.is_terminal(s)) {
            s = h.step_with_removals(s, {}).first;
            EXPECT_TRUE(s.events.empty());
        }
        EXPECT_FALSE(s.failure);
        EXPECT_EQ(s.t, h.horizon());
    }
}

TEST(Harness, PredictionOnlyModeNeverReportsTrackingFailures) {
    HarnessConfig c;
    c.mode = CriteriaMode::prediction_only;
    std::mt19937_64 gen(12);
    for (std::uint64_t sc = 1; sc <= 3; ++sc) {
        const PerceptionHarness h(random_scene(sc), c);
        for (int ep = 0; ep < 5; ++ep) {
            const Episode e = random_episode(h, gen);
            if (e.terminal.failure) {
                EXPECT_EQ(e.terminal.failure->kind, FailureKind::prediction_fde);
            }
        }
    }
}

TEST(Harness, LongHistoryRequirementDisablesPredictionFailures) {
    HarnessConfig c;
    c.min_prediction_history = 1000;
    std::mt19937_64 gen(13);
    const PerceptionHarness h(random_scene(2), c);
    for (int ep = 0; ep < 5; ++ep) {
        const Episode e = random_episode(h, gen);
        if (e.terminal.failure) {
            EXPECT_NE(e.terminal.failure->kind, FailureKind::prediction_fde);
        }
        for (const auto& ev : e.terminal.eval) EXPECT_TRUE(std::isnan(ev.fde));
    }
}

TEST(Harness, SingleTargetFailuresConcernTarget) {
    HarnessConfig c;
    c.mode = CriteriaMode::single_target;
    c.disturbance = DisturbanceKind::bernoulli;
    c.target_vehicle = "veh_1";
    std::mt19937_64 gen(14);
    const PerceptionHarness h(random_scene(6, 6.0, 3), c);
    EXPECT_EQ(h.model_count(), 1u);
    ASSERT_EQ(h.evaluated_vehicles(), std::vector<int>{1});
    for (int ep = 0; ep < 10; ++ep) {
        const Episode e = random_episode(h, gen);
        if (e.terminal.failure) {
            EXPECT_EQ(e.terminal.failure->vehicle_id, "veh_1");
        }
    }
}

TEST(Harness, BernoulliOnlyTouchesTargetBox) {
    HarnessConfig c;
    c.disturbance = DisturbanceKind::bernoulli;
    c.target_vehicle = "veh_0";
    const PerceptionHarness h(random_scene(7), c);
    const auto [s, ll] = h.step(h.initialize(), h.make_action(0, 5));
    const auto& in_box = h.in_box_points(0, 0);
    const auto& log = s.log.front();
    EXPECT_EQ(log.counts.noised + log.counts.reflected, 0u);
    EXPECT_EQ(static_cast<int>(log.counts.removed), log.removed_in_box[0]);
    const double expected =
        static_cast<double>(log.counts.removed) * std::log(0.1) +
        static_cast<double>(in_box.size() - log.counts.removed) * std::log(0.9);
    EXPECT_NEAR(ll, expected, 1e-9);
}

TEST(Harness, StepWithRemovalsScoresBernoulliOverEvaluatedBoxes) {
    HarnessConfig c;
    c.mode = CriteriaMode::single_target;
    c.disturbance = DisturbanceKind::bernoulli;
    c.target_vehicle = "veh_0";
    const PerceptionHarness h(single_vehicle_scene(), c);
    const auto& pts = h.in_box_points(0, 0);
    ASSERT_GT(pts.size(), 4u);
    std::vector<std::uint32_t> removed{pts[0], pts[1], pts[2], pts[2]};
    const auto [s, ll] = h.step_with_removals(h.initialize(), removed);
    const double m = static_cast<double>(pts.size());
    EXPECT_NEAR(ll, 3 * std::log(0.1) + (m - 3) * std::log(0.9), 1e-9);
    EXPECT_EQ(s.log.front().removed_in_box[0], 3);
    EXPECT_EQ(s.removals.front().size(), 3u);
    EXPECT_THROW(h.step_with_removals(h.initialize(), {1u << 30}), ContractViolation);
}

TEST(Harness, HorizonCapsEpisode) {
    HarnessConfig c;
    c.horizon = 3;
    const PerceptionHarness h(random_scene(9), c);
    EXPECT_EQ(h.horizon(), 3);
}

TEST(Harness, TrajectoryLengthCountsMatchedFrames) {
    const PerceptionHarness h(single_vehicle_scene(), HarnessConfig{});
    SimState s = h.initialize();
    int matched = 0;
    while (!h.is_terminal(s)) {
        s = h.step_with_removals(s, {}).first;
        matched += s.eval[0].matched;
        EXPECT_EQ(s.vehicles[0].observations, matched);
    }
    EXPECT_GT(matched, 0);
}
