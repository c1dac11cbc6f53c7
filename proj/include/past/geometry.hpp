#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace past {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

struct Vec3 {
    double x{0.0};
    double y{0.0};
    double z{0.0};

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double norm_xy() const { return std::hypot(x, y); }
};

struct Extent {
    double length{4.5};
    double width{1.8};
    double height{1.5};
    friend bool operator==(const Extent&, const Extent&) = default;
};

/// Yaw-only oriented box; `center` is the geometric center.
struct OrientedBox {
    Vec3 center;
    double yaw{0.0};
    Extent extent;

    /// Coordinates of `p` in the box frame (longitudinal, lateral, vertical offset from center).
    Vec3 to_local(Vec3 p) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const double dx = p.x - center.x, dy = p.y - center.y;
        return {c * dx + s * dy, -s * dx + c * dy, p.z - center.z};
    }

    Vec3 to_world(Vec3 local) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        return {center.x + c * local.x - s * local.y, center.y + s * local.x + c * local.y,
                center.z + local.z};
    }

    bool contains(Vec3 p, double margin = 0.0) const {
        const Vec3 l = to_local(p);
        return std::abs(l.x) <= 0.5 * extent.length + margin &&
               std::abs(l.y) <= 0.5 * extent.width + margin &&
               std::abs(l.z) <= 0.5 * extent.height + margin;
    }

    /// Footprint corners, counter-clockwise.
    std::array<Vec3, 4> corners_xy() const {
        const double hl = 0.5 * extent.length, hw = 0.5 * extent.width;
        return {to_world({hl, hw, 0}), to_world({-hl, hw, 0}), to_world({-hl, -hw, 0}),
                to_world({hl, -hw, 0})};
    }

    /// Distance along the 2D ray from `origin` with direction angle `theta` to the first
    /// footprint hit, or a negative value on a miss.
    double ray_hit_xy(Vec3 origin, double theta) const {
        const Vec3 o = to_local({origin.x, origin.y, center.z});
        const double c = std::cos(theta - yaw), s = std::sin(theta - yaw);
        const double hl = 0.5 * extent.length, hw = 0.5 * extent.width;
        double t0 = -1e300, t1 = 1e300;
        auto slab = [&](double o_i, double d_i, double h) {
            if (std::abs(d_i) < 1e-15) return std::abs(o_i) <= h;
            double a = (-h - o_i) / d_i, b = (h - o_i) / d_i;
            if (a > b) std::swap(a, b);
            t0 = std::max(t0, a);
            t1 = std::min(t1, b);
            return t0 <= t1;
        };
        if (!slab(o.x, c, hl) || !slab(o.y, s, hw)) return -1.0;
        if (t1 < 0.0) return -1.0;
        return std::max(t0, 0.0);
    }
};

}  // namespace past
