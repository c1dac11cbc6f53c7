#pragma once

// Scenario model: ground-truth vehicle motion, ego poses, and rendered LiDAR frames.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "past/errors.hpp"
#include "past/geometry.hpp"
#include "past/rng.hpp"

namespace past {

struct Pose2p5D {
    double x{0.0};
    double y{0.0};
    double z{0.0};
    double yaw{0.0};
    double speed{0.0};
    friend bool operator==(const Pose2p5D&, const Pose2p5D&) = default;
};

enum class PointFlag : std::uint8_t { original = 0, noised = 1, reflected = 2, removed = 3 };

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<PointFlag> flags;
    int frame_index{0};
    /// Sensor position in the ego frame. Ranges are measured from here.
    Vec3 origin{};

    std::size_t size() const { return points.size(); }

    void push(Vec3 p, PointFlag f = PointFlag::original) {
        points.push_back(p);
        flags.push_back(f);
    }

    double range(std::size_t i) const { return (points[i] - origin).norm(); }

    /// Points handed to perception; removed points stay in the record but are skipped here.
    std::vector<Vec3> visible_points() const {
        std::vector<Vec3> out;
        out.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            if (flags[i] != PointFlag::removed) out.push_back(points[i]);
        return out;
    }

    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct SensorModel {
    int beam_count{8};
    double max_range{40.0};
    double azimuth_resolution{2.0 * kPi / 180.0};
    double mount_height{1.8};
    double min_ground_range{3.0};
    /// Point density on the rear half of a vehicle relative to its front half.
    double rear_return_ratio{0.8};
    /// Share of a vehicle's budget placed on its sensor-facing long side at broadside view.
    double side_share{0.3};
    friend bool operator==(const SensorModel&, const SensorModel&) = default;
};

struct VehicleTruth {
    std::string vehicle_id;
    Extent extent;
    std::vector<Pose2p5D> poses;
    bool parked{false};

    OrientedBox box_at(std::size_t frame) const {
        const Pose2p5D& p = poses.at(frame);
        return {{p.x, p.y, p.z + 0.5 * extent.height}, p.yaw, extent};
    }

    friend bool operator==(const VehicleTruth&, const VehicleTruth&) = default;
};

struct Scenario {
    std::string scenario_id;
    double frame_period{0.5};
    std::vector<PointCloud> frames;
    std::vector<VehicleTruth> vehicles;
    std::vector<Pose2p5D> ego_poses;
    SensorModel sensor;

    std::size_t frame_count() const { return frames.size(); }

    int vehicle_index(const std::string& id) const {
        for (std::size_t i = 0; i < vehicles.size(); ++i)
            if (vehicles[i].vehicle_id == id) return static_cast<int>(i);
        return -1;
    }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// World -> ego-frame transform of a point (ego pose gives the frame origin and heading).
inline Vec3 world_to_ego(const Pose2p5D& ego, Vec3 p) {
    const double c = std::cos(ego.yaw), s = std::sin(ego.yaw);
    const double dx = p.x - ego.x, dy = p.y - ego.y;
    return {c * dx + s * dy, -s * dx + c * dy, p.z - ego.z};
}

inline Vec3 ego_to_world(const Pose2p5D& ego, Vec3 p) {
    const double c = std::cos(ego.yaw), s = std::sin(ego.yaw);
    return {ego.x + c * p.x - s * p.y, ego.y + s * p.x + c * p.y, p.z + ego.z};
}

inline OrientedBox box_in_ego(const Pose2p5D& ego, const OrientedBox& world_box) {
    return {world_to_ego(ego, world_box.center), wrap_angle(world_box.yaw - ego.yaw),
            world_box.extent};
}

/// Returns a description of the first violated invariant, or nothing when the scenario is valid.
inline std::optional<std::string> check_invariants(const Scenario& s) {
    if (!(s.frame_period > 0.0)) return "frame_period must be > 0";
    const std::size_t n = s.frames.size();
    if (s.ego_poses.size() != n)
        return "ego_poses length " + std::to_string(s.ego_poses.size()) +
               " != frame count " + std::to_string(n);
    if (s.sensor.beam_count < 1) return "sensor.beam_count must be >= 1";
    auto pose_ok = [](const Pose2p5D& p) {
        return p.yaw > -kPi && p.yaw <= kPi && p.speed >= 0.0;
    };
    for (std::size_t v = 0; v < s.vehicles.size(); ++v) {
        const auto& veh = s.vehicles[v];
        const std::string tag = "vehicles[" + std::to_string(v) + "]";
        if (veh.poses.size() != n)
            return tag + ".poses length " + std::to_string(veh.poses.size()) +
                   " != frame count " + std::to_string(n);
        if (!(veh.extent.length > 0 && veh.extent.width > 0 && veh.extent.height > 0))
            return tag + ".extent must be positive";
        for (std::size_t k = 0; k < n; ++k) {
            if (!pose_ok(veh.poses[k]))
                return tag + ".poses[" + std::to_string(k) + "] yaw/speed out of range";
            if (k + 1 < n) {
                const auto& a = veh.poses[k];
                const auto& b = veh.poses[k + 1];
                const double disp = std::hypot(b.x - a.x, b.y - a.y);
                const double expected = 0.5 * (a.speed + b.speed) * s.frame_period;
                if (std::abs(disp - expected) > 0.1 * expected + 0.1)
                    return tag + ".poses[" + std::to_string(k) +
                           "] displacement inconsistent with speed";
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        const auto& f = s.frames[k];
        const std::string tag = "frames[" + std::to_string(k) + "]";
        if (f.points.size() != f.flags.size()) return tag + " points/flags length mismatch";
        if (f.frame_index != static_cast<int>(k)) return tag + ".frame_index mismatch";
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f.range(i) > s.sensor.max_range + 1e-9)
                return tag + " point " + std::to_string(i) + " beyond sensor max range";
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Motion templates

enum class MotionTemplate { straight, left_turn, right_turn, stop_and_go, parked };

inline const char* to_string(MotionTemplate m) {
    switch (m) {
        case MotionTemplate::straight: return "straight";
        case MotionTemplate::left_turn: return "left_turn";
        case MotionTemplate::right_turn: return "right_turn";
        case MotionTemplate::stop_and_go: return "stop_and_go";
        case MotionTemplate::parked: return "parked";
    }
    return "?";
}

inline MotionTemplate motion_template_from_string(const std::string& s) {
    for (auto m : {MotionTemplate::straight, MotionTemplate::left_turn, MotionTemplate::right_turn,
                   MotionTemplate::stop_and_go, MotionTemplate::parked})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown motion template '" + s + "'");
}

struct VehicleSpec {
    MotionTemplate motion{MotionTemplate::straight};
    double x0{10.0};
    double y0{3.5};
    double yaw0{0.0};
    double speed{5.0};
    /// Turn or braking onset (s).
    double maneuver_start{1.0};
    /// Turn: time to complete the turn. Stop-and-go: time held at standstill.
    double maneuver_duration{6.0};
    /// Turn magnitude (rad).
    double turn_angle{kPi / 2.0};
    /// Stop-and-go braking/acceleration magnitude (m/s^2).
    double accel{2.0};
    Extent extent{};
};

/// Closed-form pose of a templated vehicle at time t.
inline Pose2p5D pose_at(const VehicleSpec& spec, double t) {
    const double v = spec.motion == MotionTemplate::parked ? 0.0 : spec.speed;
    const double c0 = std::cos(spec.yaw0), s0 = std::sin(spec.yaw0);
    switch (spec.motion) {
        case MotionTemplate::parked:
            return {spec.x0, spec.y0, 0.0, wrap_angle(spec.yaw0), 0.0};
        case MotionTemplate::straight:
            return {spec.x0 + v * t * c0, spec.y0 + v * t * s0, 0.0, wrap_angle(spec.yaw0), v};
        case MotionTemplate::left_turn:
        case MotionTemplate::right_turn: {
            const double sign = spec.motion == MotionTemplate::left_turn ? 1.0 : -1.0;
            const double omega = sign * spec.turn_angle / spec.maneuver_duration;
            const double t1 = std::min(t, spec.maneuver_start);
            double x = spec.x0 + v * t1 * c0, y = spec.y0 + v * t1 * s0, yaw = spec.yaw0;
            if (t > spec.maneuver_start) {
                const double t2 = std::min(t - spec.maneuver_start, spec.maneuver_duration);
                const double yaw2 = spec.yaw0 + omega * t2;
                x += v / omega * (std::sin(yaw2) - std::sin(spec.yaw0));
                y += v / omega * (std::cos(spec.yaw0) - std::cos(yaw2));
                yaw = yaw2;
                const double t3 = t - spec.maneuver_start - spec.maneuver_duration;
                if (t3 > 0) {
                    x += v * t3 * std::cos(yaw);
                    y += v * t3 * std::sin(yaw);
                }
            }
            return {x, y, 0.0, wrap_angle(yaw), v};
        }
        case MotionTemplate::stop_and_go: {
            // Trapezoidal speed profile: cruise, brake to rest, hold, accelerate back to cruise.
            const double a = spec.accel;
            const double tb = v / a;
            const double t_brake = spec.maneuver_start;
            const double t_hold = t_brake + tb;
            const double t_go = t_hold + spec.maneuver_duration;
            const double t_cruise = t_go + tb;
            const double s_stop = v * t_brake + 0.5 * v * tb;
            double s = 0.0, speed = v;
            if (t <= t_brake) {
                s = v * t;
            } else if (t <= t_hold) {
                const double tau = t - t_brake;
                s = v * t_brake + v * tau - 0.5 * a * tau * tau;
                speed = v - a * tau;
            } else if (t <= t_go) {
                s = s_stop;
                speed = 0.0;
            } else if (t <= t_cruise) {
                const double tau = t - t_go;
                s = s_stop + 0.5 * a * tau * tau;
                speed = a * tau;
            } else {
                s = s_stop + 0.5 * v * tb + v * (t - t_cruise);
            }
            return {spec.x0 + s * c0, spec.y0 + s * s0, 0.0, wrap_angle(spec.yaw0),
                    std::max(0.0, speed)};
        }
    }
    return {};
}

struct ScenarioConfig {
    std::string scenario_id{"scene"};
    double duration{10.0};
    double frame_rate{2.0};
    /// Used with a seeded random layout when `vehicles` is empty.
    int vehicle_count{2};
    std::vector<VehicleSpec> vehicles;
    std::vector<MotionTemplate> templates{MotionTemplate::straight, MotionTemplate::left_turn,
                                          MotionTemplate::right_turn, MotionTemplate::stop_and_go,
                                          MotionTemplate::parked};
    /// Random-layout turn rate (rad/s); turns sweep `turn_angle` at this rate.
    double turn_rate{0.26};
    double turn_angle{kPi / 2.0};
    /// Through traffic drives at 0.85-1.1x this speed; keep speed / frame_rate below the
    /// tracker gate so that newborn tracks (zero velocity) can associate.
    double ego_speed{4.0};
    SensorModel sensor;
};

// ---------------------------------------------------------------------------------------------
// Rendering

namespace detail {

inline int sector_of(double theta, double res, int n_sec) {
    const int k = static_cast<int>(std::floor((theta + kPi) / res));
    return std::clamp(k, 0, n_sec - 1);
}

/// Inverse CDF of the front-weighted longitudinal density on [-1/2, 1/2] (rear half at
/// relative density `rear_ratio`).
inline double front_weighted(double u, double rear_ratio) {
    const double q = rear_ratio / (1.0 + rear_ratio);
    return u < q ? -0.5 + 0.5 * (u / q) : 0.5 * (u - q) / (1.0 - q);
}

/// n samples in the unit square laid out in staggered rows, with the row count chosen so that
/// samples are evenly spaced over a `length` x `width` face. Longitudinal quantiles are offset
/// by `phase` in [0, 1).
inline std::vector<std::pair<double, double>> row_samples(int n, double length, double width,
                                                          double phase) {
    std::vector<std::pair<double, double>> out;
    if (n <= 0) return out;
    const int rows = std::clamp(static_cast<int>(std::lround(std::sqrt(n * width / length))), 1, n);
    out.reserve(n);
    for (int r = 0; r < rows; ++r) {
        const int cols = n / rows + (r < n % rows ? 1 : 0);
        const double shift = std::fmod(phase + 0.5 * r, 1.0);
        for (int j = 0; j < cols; ++j) out.emplace_back((j + shift) / cols, (r + 0.5) / rows);
    }
    return out;
}

}  // namespace detail

inline constexpr double kPointsAt5m = 400.0;
inline constexpr int kMaxVehiclePoints = 1200;
/// Roof area covered per return, and the narrowest roof strip, for sparse vehicles.
inline constexpr double kAreaPerPoint = 0.2;
inline constexpr double kMinStripWidth = 0.3;

/// Number of returns budgeted for an unoccluded vehicle whose center is `range` meters away.
inline int vehicle_point_budget(double range) {
    if (!(range > 0)) return kMaxVehiclePoints;
    const double n = kPointsAt5m * (5.0 / range) * (5.0 / range);
    return static_cast<int>(std::min<double>(kMaxVehiclePoints, std::round(n)));
}

/// Renders one LiDAR frame in the ego frame: a jittered polar ground grid plus returns on the
/// visible faces (roof and sensor-facing long side) of each vehicle. Occlusion is resolved with
/// an azimuth-sector z-buffer. Pure function of its arguments.
inline PointCloud render_frame(std::span<const VehicleTruth> vehicles, const Pose2p5D& ego,
                               const SensorModel& sensor, int frame, std::uint64_t seed) {
    if (sensor.beam_count < 1) throw ConfigError("sensor.beam_count must be >= 1");
    PointCloud cloud;
    cloud.frame_index = frame;
    cloud.origin = {0.0, 0.0, sensor.mount_height};

    const double res = sensor.azimuth_resolution;
    const int n_sec = static_cast<int>(std::ceil(2.0 * kPi / res - 1e-9));
    std::vector<double> zbuf(n_sec, std::numeric_limits<double>::infinity());
    std::vector<int> owner(n_sec, -1);

    std::vector<OrientedBox> boxes;
    boxes.reserve(vehicles.size());
    for (const auto& v : vehicles) boxes.push_back(box_in_ego(ego, v.box_at(frame)));

    const Vec3 sensor_xy{0.0, 0.0, 0.0};
    for (std::size_t v = 0; v < boxes.size(); ++v) {
        const auto& box = boxes[v];
        const double ac = std::atan2(box.center.y, box.center.x);
        double lo = 0.0, hi = 0.0;
        for (const auto& c : box.corners_xy()) {
            const double d = wrap_angle(std::atan2(c.y, c.x) - ac);
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        if (box.center.norm_xy() < 0.5 * std::hypot(box.extent.length, box.extent.width)) {
            lo = -kPi;
            hi = kPi;
        }
        const int k0 = static_cast<int>(std::floor((ac + lo + kPi) / res)) - 1;
        const int k1 = static_cast<int>(std::floor((ac + hi + kPi) / res)) + 1;
        for (int kk = k0; kk <= k1 && kk - k0 < n_sec; ++kk) {
            const int k = ((kk % n_sec) + n_sec) % n_sec;
            const double theta = -kPi + (k + 0.5) * res;
            const double d = box.ray_hit_xy(sensor_xy, theta);
            if (d >= 0.0 && d < zbuf[k]) {
                zbuf[k] = d;
                owner[k] = static_cast<int>(v);
            }
        }
    }

    // Ground: one ring per beam, geometric spacing, one return per azimuth sector.
    const double r_lo = sensor.min_ground_range;
    const double r_hi = 0.95 * sensor.max_range;
    for (int b = 0; b < sensor.beam_count; ++b) {
        const double r = sensor.beam_count == 1
                             ? r_lo
                             : r_lo * std::pow(r_hi / r_lo, double(b) / (sensor.beam_count - 1));
        for (int k = 0; k < n_sec; ++k) {
            if (owner[k] >= 0 && zbuf[k] < r) continue;
            const double theta = -kPi + (k + 0.5) * res;
            const std::uint64_t idx = std::uint64_t(b) * n_sec + k;
            const double jz = 0.02 * (2.0 * rng::uniform(seed, frame, idx, 1) - 1.0);
            cloud.push({r * std::cos(theta), r * std::sin(theta), jz});
        }
    }

    // Vehicles: staggered rows of samples over the roof and the sensor-facing side, with
    // front-weighted longitudinal quantiles.
    for (std::size_t v = 0; v < boxes.size(); ++v) {
        const auto& box = boxes[v];
        const double range = box.center.norm_xy();
        if (range > sensor.max_range) continue;
        const int budget = vehicle_point_budget(range);
        const std::uint64_t stream = 16 + 8 * v;

        const double los = std::atan2(-box.center.y, -box.center.x);  // box -> sensor
        const double rel = wrap_angle(los - box.yaw);
        const double side_sign = std::sin(rel) >= 0.0 ? 1.0 : -1.0;  // +lateral faces sensor
        const double L = box.extent.length, W = box.extent.width, H = box.extent.height;
        const double inset = 0.02;
        // Sparse returns stay on a centered roof strip so that neighbours remain connected;
        // the side face is only hit once the roof is fully covered.
        const double strip =
            std::clamp(budget * kAreaPerPoint / (L - 2 * inset), kMinStripWidth, W - 2 * inset);
        const bool full_roof = strip >= W - 2 * inset;
        const int n_side = full_roof ? static_cast<int>(std::round(
                                           budget * sensor.side_share * std::abs(std::sin(rel))))
                                     : 0;
        const int n_top = budget - n_side;
        const double phase = rng::uniform(seed, frame, v, stream);
        const double z_lo = 0.35 - 0.5 * H;

        const auto top = detail::row_samples(n_top, L - 2 * inset, strip, phase);
        const auto side = detail::row_samples(n_side, L - 2 * inset, 0.5 * H - inset - z_lo, phase);
        for (int i = 0; i < budget; ++i) {
            Vec3 local;
            if (i < n_top) {
                const auto [u, w] = top[i];
                local = {detail::front_weighted(u, sensor.rear_return_ratio) * (L - 2 * inset),
                         (w - 0.5) * strip, 0.5 * H - inset};
            } else {
                const auto [u, w] = side[i - n_top];
                local = {detail::front_weighted(u, sensor.rear_return_ratio) * (L - 2 * inset),
                         side_sign * (0.5 * W - inset), z_lo + w * (0.5 * H - inset - z_lo)};
            }
            for (int c = 0; c < 3; ++c) {
                const double j = 0.02 * (2.0 * rng::uniform(seed, frame, i, stream + 2 + c) - 1.0);
                (c == 0 ? local.x : c == 1 ? local.y : local.z) += j;
            }
            const Vec3 p = box.to_world(local);
            const int k = detail::sector_of(std::atan2(p.y, p.x), res, n_sec);
            if (owner[k] != static_cast<int>(v) && owner[k] != -1) continue;
            if ((p - cloud.origin).norm() > sensor.max_range) continue;
            cloud.push(p);
        }
    }
    return cloud;
}

// ---------------------------------------------------------------------------------------------
// Generation

namespace detail {

struct Lane {
    double y;
    int capacity;
    bool ahead_only;
    std::vector<double> used;
};

}  // namespace detail

/// Builds the vehicle specs for a seeded random layout: through traffic in the ego lane and the
/// two adjacent lanes, turners in the outer lanes (turning away from traffic), parked cars at
/// the curbs.
inline std::vector<VehicleSpec> random_layout(const ScenarioConfig& cfg, std::uint64_t seed) {
    if (cfg.templates.empty()) throw ConfigError("templates must be nonempty");
    std::mt19937_64 gen(rng::derive(seed, 0x1a70u));
    auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); };

    std::vector<detail::Lane> through{{3.5, 1, false, {}}, {-3.5, 1, false, {}}, {0.0, 1, true, {}}};
    detail::Lane left{7.0, 1, false, {}}, right{-7.0, 1, false, {}};
    std::vector<detail::Lane> curb{{10.5, 2, false, {}}, {-10.5, 2, false, {}}};

    auto free_lane = [](std::vector<detail::Lane*> lanes) -> detail::Lane* {
        for (auto* l : lanes)
            if (static_cast<int>(l->used.size()) < l->capacity) return l;
        return nullptr;
    };
    auto lanes_for = [&](MotionTemplate m) -> std::vector<detail::Lane*> {
        switch (m) {
            case MotionTemplate::left_turn: return {&left};
            case MotionTemplate::right_turn: return {&right};
            case MotionTemplate::parked: return {&curb[0], &curb[1]};
            case MotionTemplate::stop_and_go: return {&through[0], &through[1]};
            case MotionTemplate::straight: return {&through[0], &through[1], &through[2]};
        }
        return {};
    };

    std::vector<VehicleSpec> out;
    for (int i = 0; i < cfg.vehicle_count; ++i) {
        const auto first = static_cast<std::size_t>(gen() % cfg.templates.size());
        detail::Lane* lane = nullptr;
        MotionTemplate m{};
        for (std::size_t j = 0; j < cfg.templates.size() && !lane; ++j) {
            m = cfg.templates[(first + j) % cfg.templates.size()];
            auto cands = lanes_for(m);
            // Randomize lane preference within a template.
            if (cands.size() > 1) std::rotate(cands.begin(), cands.begin() + gen() % cands.size(), cands.end());
            lane = free_lane(cands);
        }
        if (!lane) throw ConfigError("vehicle_count exceeds random layout capacity");

        VehicleSpec spec;
        spec.motion = m;
        spec.y0 = lane->y;
        if (m == MotionTemplate::parked) {
            double x = 0.0;
            do { x = unif(5.0, 35.0); } while (!lane->used.empty() && std::abs(x - lane->used[0]) < 8.0);
            spec.x0 = x;
            spec.yaw0 = gen() % 2 ? 0.0 : kPi;
            spec.speed = 0.0;
        } else {
            spec.x0 = lane->ahead_only ? unif(8.0, 16.0) : unif(-12.0, 16.0);
            spec.speed = cfg.ego_speed * (lane->ahead_only ? unif(1.0, 1.1) : unif(0.85, 1.1));
        }
        lane->used.push_back(spec.x0);
        spec.turn_angle = cfg.turn_angle;
        spec.maneuver_duration = m == MotionTemplate::stop_and_go ? unif(1.0, 3.0)
                                                                  : cfg.turn_angle / cfg.turn_rate;
        spec.maneuver_start = unif(1.0, std::max(1.0, 0.5 * cfg.duration));
        spec.accel = 2.0;
        out.push_back(spec);
    }

    // Keep parked cars clear of the swept paths of turning traffic so that clusters stay apart.
    const auto n_frames = static_cast<int>(std::llround(cfg.duration * cfg.frame_rate));
    auto clear_of_traffic = [&](const VehicleSpec& p, std::size_t self) {
        for (std::size_t j = 0; j < out.size(); ++j) {
            if (j == self || out[j].motion == MotionTemplate::parked) continue;
            for (int k = 0; k < n_frames; ++k) {
                const Pose2p5D q = pose_at(out[j], k / cfg.frame_rate);
                if (std::hypot(q.x - p.x0, q.y - p.y0) < 5.0) return false;
            }
        }
        return true;
    };
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].motion != MotionTemplate::parked) continue;
        for (int attempt = 0; attempt < 64 && !clear_of_traffic(out[i], i); ++attempt) {
            double x = 0.0;
            bool spaced = false;
            while (!spaced) {
                x = unif(5.0, 35.0);
                spaced = true;
                for (std::size_t j = 0; j < out.size(); ++j)
                    if (j != i && out[j].motion == MotionTemplate::parked && out[j].y0 == out[i].y0 &&
                        std::abs(x - out[j].x0) < 8.0)
                        spaced = false;
            }
            out[i].x0 = x;
        }
    }
    return out;
}

/// Generates a scenario deterministically from (config, seed). The ego drives straight along
/// +x at `ego_speed`; vehicles follow closed-form motion templates.
inline Scenario generate_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    if (!(cfg.duration > 0.0)) throw ConfigError("duration must be > 0");
    if (!(cfg.frame_rate > 0.0)) throw ConfigError("frame_rate must be > 0");
    if (cfg.vehicles.empty() && cfg.vehicle_count <= 0)
        throw ConfigError("scenario needs at least one vehicle");
    if (cfg.sensor.beam_count < 1) throw ConfigError("sensor.beam_count must be >= 1");

    const std::vector<VehicleSpec> specs =
        cfg.vehicles.empty() ? random_layout(cfg, seed) : cfg.vehicles;
    const auto n_frames = static_cast<std::size_t>(std::llround(cfg.duration * cfg.frame_rate));
    if (n_frames == 0) throw ConfigError("duration * frame_rate yields zero frames");

    Scenario s;
    s.scenario_id = cfg.scenario_id;
    s.frame_period = 1.0 / cfg.frame_rate;
    s.sensor = cfg.sensor;
    for (std::size_t k = 0; k < n_frames; ++k) {
        const double t = k * s.frame_period;
        s.ego_poses.push_back({cfg.ego_speed * t, 0.0, 0.0, 0.0, cfg.ego_speed});
    }
    for (std::size_t v = 0; v < specs.size(); ++v) {
        VehicleTruth truth;
        truth.vehicle_id = "veh_" + std::to_string(v);
        truth.extent = specs[v].extent;
        truth.parked = specs[v].motion == MotionTemplate::parked;
        for (std::size_t k = 0; k < n_frames; ++k)
            truth.poses.push_back(pose_at(specs[v], k * s.frame_period));
        s.vehicles.push_back(std::move(truth));
    }
    for (std::size_t k = 0; k < n_frames; ++k)
        s.frames.push_back(render_frame(s.vehicles, s.ego_poses[k], s.sensor, static_cast<int>(k), seed));
    return s;
}

}  // namespace past
