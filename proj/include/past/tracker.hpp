#pragma once

// Multi-object tracker: constant-velocity Kalman filter per track over the state
// (x, y, z, yaw, l, w, h, vx, vy), center-distance association and a hits/misses lifecycle.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "past/assignment.hpp"
#include "past/detector.hpp"
#include "past/errors.hpp"
#include "past/geometry.hpp"

namespace past {

inline constexpr int kStateDim = 9;
inline constexpr int kMeasDim = 7;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using StateCov = Eigen::Matrix<double, kStateDim, kStateDim>;
using MeasVec = Eigen::Matrix<double, kMeasDim, 1>;

struct TrackerParams {
    double gate{2.5};
    int max_age{3};
    int min_hits{2};
    /// Acceleration noise scale; Q is diagonal with q*dt^4/4 on position and q*dt^2 elsewhere.
    double process_noise{0.5};
    double r_position{0.25};
    double r_yaw{0.1};
    double r_extent{0.25};
    double init_velocity_var{25.0};
    friend bool operator==(const TrackerParams&, const TrackerParams&) = default;
};

struct Track {
    int track_id{0};
    StateVec state{StateVec::Zero()};
    StateCov covariance{StateCov::Identity()};
    int hits{0};
    /// Consecutive frames without a matched detection.
    int misses{0};
    int age{0};

    Vec3 position() const { return {state[0], state[1], state[2]}; }
    double yaw() const { return state[3]; }
    Extent extent() const { return {state[4], state[5], state[6]}; }
    double vx() const { return state[7]; }
    double vy() const { return state[8]; }
    double speed() const { return std::hypot(state[7], state[8]); }
    bool operator==(const Track& o) const {
        return track_id == o.track_id && state == o.state && covariance == o.covariance &&
               hits == o.hits && misses == o.misses && age == o.age;
    }
};

struct TrackSet {
    std::vector<Track> tracks;
    int frame_index{-1};
    int next_id{0};
    bool operator==(const TrackSet&) const = default;
};

inline StateCov process_noise(double dt, const TrackerParams& p) {
    StateCov q = StateCov::Zero();
    const double pos = p.process_noise * dt * dt * dt * dt / 4.0;
    const double other = p.process_noise * dt * dt;
    for (int i = 0; i < 3; ++i) q(i, i) = pos;
    for (int i = 3; i < kStateDim; ++i) q(i, i) = other;
    return q;
}

inline StateCov transition(double dt) {
    StateCov f = StateCov::Identity();
    f(0, 7) = dt;
    f(1, 8) = dt;
    return f;
}

inline Eigen::Matrix<double, kMeasDim, kMeasDim> measurement_noise(const TrackerParams& p) {
    Eigen::Matrix<double, kMeasDim, 1> d;
    d << p.r_position, p.r_position, p.r_position, p.r_yaw, p.r_extent, p.r_extent, p.r_extent;
    return d.asDiagonal();
}

inline MeasVec measurement_of(const Detection& d) {
    MeasVec z;
    z << d.center.x, d.center.y, d.center.z, d.yaw, d.extent.length, d.extent.width, d.extent.height;
    return z;
}

/// Advances every track by dt under constant-velocity dynamics.
inline TrackSet predict_tracks(const TrackSet& set, double dt, const TrackerParams& params = {}) {
    if (!(dt > 0.0)) throw ContractViolation("predict_tracks: dt must be > 0");
    const StateCov f = transition(dt);
    const StateCov q = process_noise(dt, params);
    TrackSet out = set;
    for (auto& t : out.tracks) {
        t.state = f * t.state;
        t.state[3] = wrap_angle(t.state[3]);
        t.covariance = f * t.covariance * f.transpose() + q;
        t.covariance = 0.5 * (t.covariance + t.covariance.transpose());
        ++t.age;
    }
    return out;
}

/// Matches tracks (rows, in TrackSet order) to detections by center distance within the gate.
inline Assignment associate(const TrackSet& set, const std::vector<Detection>& detections,
                            const TrackerParams& params = {}) {
    std::vector<std::vector<double>> cost(set.tracks.size(),
                                          std::vector<double>(detections.size(), 0.0));
    for (std::size_t i = 0; i < set.tracks.size(); ++i)
        for (std::size_t j = 0; j < detections.size(); ++j)
            cost[i][j] = (set.tracks[i].position() - detections[j].center).norm();
    return gated_assignment(cost, detections.size(), params.gate);
}

inline Track spawn_track(int id, const Detection& d, const TrackerParams& params) {
    Track t;
    t.track_id = id;
    t.state.head<kMeasDim>() = measurement_of(d);
    t.state[7] = t.state[8] = 0.0;
    StateCov p = StateCov::Zero();
    p.topLeftCorner<kMeasDim, kMeasDim>() = measurement_noise(params);
    p(7, 7) = p(8, 8) = params.init_velocity_var;
    t.covariance = p;
    t.hits = 1;
    t.misses = 0;
    t.age = 1;
    return t;
}

/// Kalman update (Joseph form) of one track with a detection.
inline void kalman_update(Track& t, const Detection& d, const TrackerParams& params) {
    Eigen::Matrix<double, kMeasDim, kStateDim> h = Eigen::Matrix<double, kMeasDim, kStateDim>::Zero();
    h.leftCols<kMeasDim>().setIdentity();
    MeasVec innovation = measurement_of(d) - h * t.state;
    innovation[3] = wrap_angle(innovation[3]);
    const auto r = measurement_noise(params);
    const Eigen::Matrix<double, kMeasDim, kMeasDim> s = h * t.covariance * h.transpose() + r;
    const Eigen::Matrix<double, kStateDim, kMeasDim> k =
        s.ldlt().solve(h * t.covariance.transpose()).transpose();
    t.state += k * innovation;
    t.state[3] = wrap_angle(t.state[3]);
    const StateCov ikh = StateCov::Identity() - k * h;
    t.covariance = ikh * t.covariance * ikh.transpose() + k * r * k.transpose();
    t.covariance = 0.5 * (t.covariance + t.covariance.transpose());
}

/// Applies an association: updates matched tracks, ages unmatched ones, deletes stale tracks
/// and spawns tentative tracks for unmatched detections.
inline TrackSet update_tracks(const TrackSet& set, const std::vector<Detection>& detections,
                              const Assignment& assignment, int frame_index,
                              const TrackerParams& params = {}) {
    TrackSet out = set;
    out.frame_index = frame_index;
    for (auto [i, j] : assignment.matches) {
        auto& t = out.tracks[i];
        kalman_update(t, detections[j], params);
        ++t.hits;
        t.misses = 0;
    }
    for (int i : assignment.unmatched_rows) ++out.tracks[i].misses;
    std::erase_if(out.tracks, [&](const Track& t) { return t.misses >= params.max_age; });
    for (int j : assignment.unmatched_cols) out.tracks.push_back(spawn_track(out.next_id++, detections[j], params));
    return out;
}

/// One tracking cycle. The first frame (empty set, no prior frame) skips prediction.
inline TrackSet track_step(const TrackSet& set, const std::vector<Detection>& detections, double dt,
                           int frame_index, const TrackerParams& params = {}) {
    const TrackSet predicted = set.frame_index < 0 ? set : predict_tracks(set, dt, params);
    return update_tracks(predicted, detections, associate(predicted, detections, params), frame_index,
                         params);
}

/// Tracks reported downstream: confirmed and updated in the current frame.
inline bool is_reported(const Track& t, const TrackerParams& params = {}) {
    return t.hits >= params.min_hits && t.misses == 0;
}

}  // namespace past
