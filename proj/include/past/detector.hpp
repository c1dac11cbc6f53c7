#pragma once

// Geometric car detector: ground removal, Euclidean clustering, PCA oriented-box fitting.
//
// Heading sign is resolved toward the denser end of the cluster. Rendered vehicles return
// more points from their front half, so stripping front points can flip the heading by pi.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "past/geometry.hpp"
#include "past/scene.hpp"

namespace past {

struct DetectorParams {
    double ground_z{0.3};
    double eps{0.7};
    int min_points{8};
    double confidence_saturation{60.0};
    double min_extent{0.5};
    double max_extent{8.0};
    friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

struct Detection {
    Vec3 center;
    Extent extent;
    double yaw{0.0};
    double confidence{0.0};
    int point_count{0};
    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Drops ground returns (z below the threshold) and points flagged removed.
inline PointCloud remove_ground(const PointCloud& cloud, const DetectorParams& params = {}) {
    PointCloud out;
    out.frame_index = cloud.frame_index;
    out.origin = cloud.origin;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.flags[i] != PointFlag::removed && cloud.points[i].z >= params.ground_z)
            out.push(cloud.points[i], cloud.flags[i]);
    return out;
}

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

inline std::int64_t cell_key(std::int64_t x, std::int64_t y, std::int64_t z) {
    return (x & 0x1FFFFF) | ((y & 0x1FFFFF) << 21) | ((z & 0x1FFFFF) << 42);
}

}  // namespace detail

/// Connected components of the "within eps" relation among points not flagged removed; clusters
/// smaller than min_points are dropped. Clusters are listed by their smallest point index.
inline std::vector<std::vector<std::size_t>> cluster(const PointCloud& cloud,
                                                     const DetectorParams& params = {}) {
    const double eps = params.eps, eps2 = eps * eps;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
    auto cell = [&](double v) { return static_cast<std::int64_t>(std::floor(v / eps)); };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.flags[i] == PointFlag::removed) continue;
        const auto& p = cloud.points[i];
        grid[detail::cell_key(cell(p.x), cell(p.y), cell(p.z))].push_back(i);
    }
    detail::DisjointSets sets(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.flags[i] == PointFlag::removed) continue;
        const auto& p = cloud.points[i];
        const auto cx = cell(p.x), cy = cell(p.y), cz = cell(p.z);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto it = grid.find(detail::cell_key(cx + dx, cy + dy, cz + dz));
                    if (it == grid.end()) continue;
                    for (std::size_t j : it->second) {
                        if (j <= i) continue;
                        const Vec3 d = cloud.points[j] - p;
                        if (d.x * d.x + d.y * d.y + d.z * d.z <= eps2) sets.unite(i, j);
                    }
                }
    }
    std::unordered_map<std::size_t, std::size_t> slot;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.flags[i] == PointFlag::removed) continue;
        const auto root = sets.find(i);
        auto [it, fresh] = slot.try_emplace(root, groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out;
    for (auto& g : groups)
        if (static_cast<int>(g.size()) >= params.min_points) out.push_back(std::move(g));
    return out;
}

/// Fits an oriented box to one cluster. Yaw follows the principal axis of the xy scatter and
/// points toward the end holding more points; a rank-deficient scatter falls back to yaw 0 at
/// half confidence.
inline Detection fit_box(std::span<const Vec3> cluster_points, const DetectorParams& params = {}) {
    std::vector<Vec3> pts(cluster_points.begin(), cluster_points.end());
    std::sort(pts.begin(), pts.end(), [](const Vec3& a, const Vec3& b) {
        return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
    });
    const double n = static_cast<double>(pts.size());
    Detection det;
    det.point_count = static_cast<int>(pts.size());
    if (pts.empty()) return det;

    double mx = 0, my = 0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : pts) {
        sxx += (p.x - mx) * (p.x - mx);
        syy += (p.y - my) * (p.y - my);
        sxy += (p.x - mx) * (p.y - my);
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    const double tr = sxx + syy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
    const double lmax = 0.5 * tr + disc, lmin = 0.5 * tr - disc;
    const bool degenerate = lmax <= 1e-12 || lmin <= 1e-9 * lmax;

    const double axis = degenerate ? 0.0 : 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    const double c = std::cos(axis), s = std::sin(axis);
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300, zmin = 1e300, zmax = -1e300;
    for (const auto& p : pts) {
        const double u = c * (p.x - mx) + s * (p.y - my);
        const double v = -s * (p.x - mx) + c * (p.y - my);
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        zmin = std::min(zmin, p.z);
        zmax = std::max(zmax, p.z);
    }
    const double uc = 0.5 * (umin + umax), vc = 0.5 * (vmin + vmax);
    auto clamp_ext = [&](double e) { return std::clamp(e, params.min_extent, params.max_extent); };
    det.center = {mx + c * uc - s * vc, my + s * uc + c * vc, 0.5 * (zmin + zmax)};
    det.extent = {clamp_ext(umax - umin), clamp_ext(vmax - vmin), clamp_ext(zmax - zmin)};

    double yaw = axis;
    if (!degenerate) {
        int front = 0, rear = 0;
        for (const auto& p : pts) {
            const double u = c * (p.x - mx) + s * (p.y - my) - uc;
            if (u > 0) ++front;
            else if (u < 0) ++rear;
        }
        if (rear > front) yaw = axis + kPi;
    }
    det.yaw = wrap_angle(yaw);
    det.confidence = std::min(1.0, n / params.confidence_saturation);
    if (degenerate) det.confidence *= 0.5;
    return det;
}

struct DetectionSet {
    std::vector<Detection> detections;
    /// members[k] holds the source-cloud indices of detection k's points.
    std::vector<std::vector<std::size_t>> members;
};

/// detect(), also reporting which cloud points produced each detection.
inline DetectionSet detect_with_members(const PointCloud& cloud, const DetectorParams& params = {}) {
    PointCloud above;
    above.frame_index = cloud.frame_index;
    above.origin = cloud.origin;
    std::vector<std::size_t> source;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.flags[i] != PointFlag::removed && cloud.points[i].z >= params.ground_z) {
            above.push(cloud.points[i], cloud.flags[i]);
            source.push_back(i);
        }
    const auto clusters = cluster(above, params);
    std::vector<std::pair<Detection, std::vector<std::size_t>>> found;
    found.reserve(clusters.size());
    std::vector<Vec3> pts;
    for (const auto& cl : clusters) {
        pts.clear();
        std::vector<std::size_t> members;
        for (auto i : cl) {
            pts.push_back(above.points[i]);
            members.push_back(source[i]);
        }
        found.emplace_back(fit_box(pts, params), std::move(members));
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        if (a.first.confidence != b.first.confidence) return a.first.confidence > b.first.confidence;
        return std::tie(a.first.center.x, a.first.center.y) < std::tie(b.first.center.x, b.first.center.y);
    });
    DetectionSet out;
    for (auto& [d, m] : found) {
        out.detections.push_back(d);
        out.members.push_back(std::move(m));
    }
    return out;
}

/// Ground removal, clustering and box fitting; detections sorted by confidence, descending.
inline std::vector<Detection> detect(const PointCloud& cloud, const DetectorParams& params = {}) {
    return detect_with_members(cloud, params).detections;
}

}  // namespace past
