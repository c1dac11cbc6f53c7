#include <gtest/gtest.h>

#include <cmath>

#include "past/scenario_io.hpp"
#include "past/scene.hpp"

using namespace past;

namespace {

ScenarioConfig two_vehicle_config() {
    ScenarioConfig cfg;
    cfg.scenario_id = "two";
    cfg.duration = 10.0;
    cfg.frame_rate = 2.0;
    cfg.vehicle_count = 2;
    return cfg;
}

std::size_t points_in_box(const PointCloud& c, const OrientedBox& b) {
    std::size_t n = 0;
    for (const auto& p : c.points) n += b.contains(p, 0.05);
    return n;
}

// Heading of a templated vehicle, written directly from the template definitions.
double yaw_rate_at(const VehicleSpec& s, double t) {
    if (s.motion != MotionTemplate::left_turn && s.motion != MotionTemplate::right_turn) return 0.0;
    if (t < s.maneuver_start || t > s.maneuver_start + s.maneuver_duration) return 0.0;
    const double sign = s.motion == MotionTemplate::left_turn ? 1.0 : -1.0;
    return sign * s.turn_angle / s.maneuver_duration;
}

}  // namespace

TEST(GenerateScenario, FrameCountIsDurationTimesRate) {
    const auto s = generate_scenario(two_vehicle_config(), 1);
    EXPECT_EQ(s.frame_count(), 20u);
    EXPECT_EQ(s.ego_poses.size(), 20u);
    ASSERT_EQ(s.vehicles.size(), 2u);
    for (const auto& v : s.vehicles) EXPECT_EQ(v.poses.size(), 20u);
    EXPECT_DOUBLE_EQ(s.frame_period, 0.5);
}

TEST(GenerateScenario, DeterministicAndByteIdentical) {
    const auto a = generate_scenario(two_vehicle_config(), 77);
    const auto b = generate_scenario(two_vehicle_config(), 77);
    EXPECT_EQ(a, b);
    EXPECT_EQ(scenario_to_json(a).dump(), scenario_to_json(b).dump());
    const auto c = generate_scenario(two_vehicle_config(), 78);
    EXPECT_NE(scenario_to_json(a).dump(), scenario_to_json(c).dump());
}

TEST(GenerateScenario, LeftTurnSweepsQuarterCircle) {
    ScenarioConfig cfg;
    cfg.duration = 10.0;
    cfg.frame_rate = 2.0;
    VehicleSpec spec;
    spec.motion = MotionTemplate::left_turn;
    spec.x0 = 10;
    spec.y0 = 7;
    spec.maneuver_start = 1.0;
    spec.maneuver_duration = 8.0;
    spec.turn_angle = kPi / 2;
    cfg.vehicles = {spec};
    const auto s = generate_scenario(cfg, 5);
    const auto& poses = s.vehicles[0].poses;
    EXPECT_NEAR(poses.back().yaw - poses.front().yaw, kPi / 2, 1e-6);
}

TEST(GenerateScenario, TemplatePositionsMatchNumericIntegration) {
    for (auto m : {MotionTemplate::straight, MotionTemplate::left_turn, MotionTemplate::right_turn}) {
        VehicleSpec spec;
        spec.motion = m;
        spec.x0 = 3;
        spec.y0 = -2;
        spec.yaw0 = 0.4;
        spec.speed = 6;
        spec.maneuver_start = 1.5;
        spec.maneuver_duration = 4.0;
        spec.turn_angle = 1.2;
        // Forward Euler at 1e-4 s (midpoint yaw) on the yaw-rate definition.
        double x = spec.x0, y = spec.y0, yaw = spec.yaw0;
        const double h = 1e-4;
        for (int k = 0; k < 80000; ++k) {
            const double t = k * h;
            const double ym = yaw + 0.5 * h * yaw_rate_at(spec, t + 0.5 * h);
            x += h * spec.speed * std::cos(ym);
            y += h * spec.speed * std::sin(ym);
            yaw += h * yaw_rate_at(spec, t + 0.5 * h);
        }
        const auto p = pose_at(spec, 8.0);
        EXPECT_NEAR(p.x, x, 1e-3) << to_string(m);
        EXPECT_NEAR(p.y, y, 1e-3) << to_string(m);
        EXPECT_NEAR(p.yaw, wrap_angle(yaw), 1e-6) << to_string(m);
    }
}

TEST(GenerateScenario, StopAndGoDisplacementIsIntegratedSpeed) {
    VehicleSpec spec;
    spec.motion = MotionTemplate::stop_and_go;
    spec.speed = 5;
    spec.maneuver_start = 2;
    spec.maneuver_duration = 1.5;
    spec.accel = 2;
    double s = 0;
    const double h = 1e-4;
    for (int k = 0; k < 100000; ++k) s += h * pose_at(spec, (k + 0.5) * h).speed;
    const auto p = pose_at(spec, 10.0);
    EXPECT_NEAR(p.x - spec.x0, s, 1e-3);
    EXPECT_NEAR(pose_at(spec, 2 + 2.5 + 0.7).speed, 0.0, 1e-12);
    EXPECT_NEAR(pose_at(spec, 10.0).speed, 5.0, 1e-12);
}

TEST(GenerateScenario, RejectsInvalidConfigs) {
    auto cfg = two_vehicle_config();
    cfg.vehicle_count = 0;
    EXPECT_THROW(generate_scenario(cfg, 1), ConfigError);
    cfg = two_vehicle_config();
    cfg.duration = 0;
    EXPECT_THROW(generate_scenario(cfg, 1), ConfigError);
    cfg = two_vehicle_config();
    cfg.frame_rate = -1;
    EXPECT_THROW(generate_scenario(cfg, 1), ConfigError);
    cfg = two_vehicle_config();
    cfg.vehicle_count = 40;
    EXPECT_THROW(generate_scenario(cfg, 1), ConfigError);
}

TEST(GenerateScenario, GeneratedScenesSatisfyInvariants) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        ScenarioConfig cfg;
        cfg.vehicle_count = 1 + static_cast<int>(seed % 5);
        const auto s = generate_scenario(cfg, seed);
        const auto bad = check_invariants(s);
        EXPECT_FALSE(bad.has_value()) << "seed " << seed << ": " << bad.value_or("");
    }
}

TEST(RenderFrame, PointCountDecreasesWithRange) {
    SensorModel sensor;
    const Pose2p5D ego{};
    std::size_t previous = 1u << 30;
    for (double r = 6.0; r <= 38.0; r += 1.0) {
        VehicleTruth v{"v", {}, {{r, 0.0, 0.0, 0.0, 0.0}}, false};
        const auto cloud = render_frame(std::span(&v, 1), ego, sensor, 0, 11);
        const auto n = points_in_box(cloud, v.box_at(0));
        EXPECT_LE(n, previous) << "range " << r;
        previous = n;
    }
    EXPECT_GT(previous, 0u);
}

TEST(RenderFrame, FullyOccludedVehicleGetsNoPoints) {
    SensorModel sensor;
    std::vector<VehicleTruth> vs{{"near", {}, {{10, 0, 0, 0, 0}}, false},
                                 {"far", {}, {{20, 0, 0, 0, 0}}, false}};
    const auto cloud = render_frame(vs, Pose2p5D{}, sensor, 0, 3);
    EXPECT_GT(points_in_box(cloud, vs[0].box_at(0)), 50u);
    EXPECT_EQ(points_in_box(cloud, vs[1].box_at(0)), 0u);
}

TEST(RenderFrame, GroundOnlyWhenNothingInRange) {
    SensorModel sensor;
    VehicleTruth v{"v", {}, {{200, 0, 0, 0, 0}}, false};
    const auto cloud = render_frame(std::span(&v, 1), Pose2p5D{}, sensor, 0, 1);
    ASSERT_GT(cloud.size(), 0u);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        EXPECT_LE(std::abs(cloud.points[i].z), 0.02 + 1e-12);
        EXPECT_LE(cloud.range(i), sensor.max_range);
    }
}

TEST(RenderFrame, FrontHalfCarriesMorePoints) {
    SensorModel sensor;
    VehicleTruth v{"v", {}, {{12, 4, 0, 0.3, 0}}, false};
    const auto cloud = render_frame(std::span(&v, 1), Pose2p5D{}, sensor, 0, 1);
    const auto box = v.box_at(0);
    int front = 0, rear = 0;
    for (const auto& p : cloud.points) {
        if (!box.contains(p, 0.05)) continue;
        (box.to_local(p).x > 0 ? front : rear)++;
    }
    EXPECT_GT(front, rear);
    EXPECT_NEAR(static_cast<double>(rear) / front, sensor.rear_return_ratio, 0.1);
}

TEST(RenderFrame, RequiresAtLeastOneBeam) {
    SensorModel sensor;
    sensor.beam_count = 0;
    VehicleTruth v{"v", {}, {{10, 0, 0, 0, 0}}, false};
    EXPECT_THROW(render_frame(std::span(&v, 1), Pose2p5D{}, sensor, 0, 1), ConfigError);
}
