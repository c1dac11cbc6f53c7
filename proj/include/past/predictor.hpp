#pragma once

// Candidate-set trajectory predictor. A fixed lattice of constant-speed, constant-turn-rate
// trajectories is scored against each track's recent motion and normalized with a softmax.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "past/errors.hpp"
#include "past/geometry.hpp"
#include "past/tracker.hpp"

namespace past {

struct Point2 {
    double x{0.0};
    double y{0.0};
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct PredictorParams {
    std::vector<double> speed_multipliers{0.5, 0.75, 1.0, 1.25, 1.5};
    std::vector<double> turn_rates{0.0, 0.065, -0.065, 0.13, -0.13, 0.26, -0.26, 0.52, -0.52};
    double horizon{6.0};
    double step{0.5};
    double temperature{1.0};
    /// Past track positions used for scoring (most recent first).
    int history_length{4};
    int top_k{5};
    friend bool operator==(const PredictorParams&, const PredictorParams&) = default;
};

struct Candidate {
    double speed_multiplier{1.0};
    double turn_rate{0.0};
    /// Offsets at t = 0, step, ..., horizon for unit track speed, in the heading frame.
    std::vector<Point2> offsets;
};

struct CandidateSet {
    double horizon{6.0};
    double step{0.5};
    std::vector<Candidate> candidates;
};

/// Position at time t (may be negative) along a constant-turn arc of unit base speed.
inline Point2 arc_position(double multiplier, double turn_rate, double t) {
    const double s = multiplier * t;
    if (std::abs(turn_rate) < 1e-12) return {s, 0.0};
    const double phi = turn_rate * t;
    return {multiplier * std::sin(phi) / turn_rate, multiplier * (1.0 - std::cos(phi)) / turn_rate};
}

/// Multiplier-major lattice of candidates.
inline CandidateSet build_candidates(const PredictorParams& params = {}) {
    if (params.speed_multipliers.empty() || params.turn_rates.empty())
        throw ConfigError("predictor: speed and turn-rate grids must be nonempty");
    if (!(params.horizon > 0 && params.step > 0)) throw ConfigError("predictor: horizon and step must be > 0");
    CandidateSet set;
    set.horizon = params.horizon;
    set.step = params.step;
    const int n = static_cast<int>(std::llround(params.horizon / params.step));
    for (double m : params.speed_multipliers)
        for (double w : params.turn_rates) {
            Candidate c{m, w, {}};
            for (int k = 0; k <= n; ++k) c.offsets.push_back(arc_position(m, w, k * params.step));
            set.candidates.push_back(std::move(c));
        }
    return set;
}

struct RankedTrajectory {
    int candidate{0};
    std::vector<Point2> points;  // world frame, starting at the track position
    double confidence{0.0};
};

struct TrajectoryPrediction {
    int track_id{0};
    std::vector<RankedTrajectory> ranked;
};

/// Scores every candidate against `history` (past track positions, most recent first, one per
/// frame_period) and returns all candidates ranked by confidence. Parked vehicles, and tracks
/// with fewer than two past positions, get no prediction.
inline std::optional<TrajectoryPrediction> predict(const Track& track, std::span<const Vec3> history,
                                                   const CandidateSet& candidates, double frame_period,
                                                   const PredictorParams& params = {}, bool parked = false) {
    if (parked || history.size() < 2 || candidates.candidates.empty()) return std::nullopt;
    const double cx = track.state[0], cy = track.state[1];
    const double c = std::cos(track.yaw()), s = std::sin(track.yaw());
    const double speed = track.speed();
    const std::size_t used = std::min<std::size_t>(history.size(), static_cast<std::size_t>(params.history_length));

    std::vector<Point2> local(used);
    for (std::size_t j = 0; j < used; ++j) {
        const double dx = history[j].x - cx, dy = history[j].y - cy;
        local[j] = {c * dx + s * dy, -s * dx + c * dy};
    }

    const auto n = candidates.candidates.size();
    std::vector<double> score(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& cand = candidates.candidates[k];
        double sse = 0.0;
        for (std::size_t j = 0; j < used; ++j) {
            const Point2 back = arc_position(cand.speed_multiplier, cand.turn_rate, -(j + 1.0) * frame_period);
            const double ex = speed * back.x - local[j].x, ey = speed * back.y - local[j].y;
            sse += ex * ex + ey * ey;
        }
        score[k] = -sse / params.temperature;
    }
    const double top = *std::max_element(score.begin(), score.end());
    std::vector<double> weight(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) total += weight[k] = std::exp(score[k] - top);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    TrajectoryPrediction out;
    out.track_id = track.track_id;
    out.ranked.reserve(n);
    for (std::size_t k : order) {
        RankedTrajectory r;
        r.candidate = static_cast<int>(k);
        r.confidence = weight[k] / total;
        for (const auto& o : candidates.candidates[k].offsets) {
            const double lx = speed * o.x, ly = speed * o.y;
            r.points.push_back({cx + c * lx - s * ly, cy + s * lx + c * ly});
        }
        out.ranked.push_back(std::move(r));
    }
    return out;
}

}  // namespace past
