#pragma once

// Black-box simulator over one scenario: applies a disturbance to each recorded frame, runs
// detect -> track -> predict, checks the failure criteria and scores actions.
//
// The harness itself is immutable after construction and may be shared between threads; all
// episode state lives in SimState values, so stepping never mutates its input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "past/assignment.hpp"
#include "past/detector.hpp"
#include "past/disturbance.hpp"
#include "past/errors.hpp"
#include "past/predictor.hpp"
#include "past/scene.hpp"
#include "past/tracker.hpp"

namespace past {

enum class FailureKind { track_error, track_lost, prediction_fde };

inline const char* to_string(FailureKind k) {
    switch (k) {
        case FailureKind::track_error: return "track_error";
        case FailureKind::track_lost: return "track_lost";
        case FailureKind::prediction_fde: return "prediction_fde";
    }
    return "?";
}

inline FailureKind failure_kind_from_string(const std::string& s) {
    for (auto k : {FailureKind::track_error, FailureKind::track_lost, FailureKind::prediction_fde})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown failure kind '" + s + "'");
}

/// Which failures end an episode. single_target evaluates one vehicle with tracking criteria
/// and the top-1 prediction; the other modes evaluate every vehicle with min-over-top-k FDE.
enum class CriteriaMode { tracking_and_prediction, prediction_only, single_target };

inline const char* to_string(CriteriaMode m) {
    switch (m) {
        case CriteriaMode::tracking_and_prediction: return "tracking_and_prediction";
        case CriteriaMode::prediction_only: return "prediction_only";
        case CriteriaMode::single_target: return "single_target";
    }
    return "?";
}

inline CriteriaMode criteria_mode_from_string(const std::string& s) {
    for (auto m : {CriteriaMode::tracking_and_prediction, CriteriaMode::prediction_only,
                   CriteriaMode::single_target})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown criteria mode '" + s + "'");
}

enum class DisturbanceKind { rain, bernoulli };

inline const char* to_string(DisturbanceKind k) { return k == DisturbanceKind::rain ? "rain" : "bernoulli"; }

inline DisturbanceKind disturbance_kind_from_string(const std::string& s) {
    if (s == "rain") return DisturbanceKind::rain;
    if (s == "bernoulli") return DisturbanceKind::bernoulli;
    throw ConfigError("unknown disturbance model '" + s + "'");
}

struct HarnessConfig {
    CriteriaMode mode{CriteriaMode::tracking_and_prediction};
    DisturbanceKind disturbance{DisturbanceKind::rain};
    RainParams rain;
    double theta{0.1};
    /// Vehicle evaluated in single_target mode and disturbed by the Bernoulli model.
    std::string target_vehicle;
    DetectorParams detector;
    TrackerParams tracker;
    PredictorParams predictor;
    double position_error_threshold{2.0};
    int lost_frames{2};
    double fde_threshold{15.0};
    /// Past track positions required before a track's prediction is scored. Velocity after two
    /// updates is still settling, so the default waits for the predictor's full window.
    int min_prediction_history{4};
    /// Gate (m) of the track <-> ground-truth assignment used for evaluation.
    double eval_gate{4.0};
    double alpha{1e5};
    /// Episode length in frames; 0 means the whole scenario.
    int horizon{0};

    void validate() const {
        rain.validate();
        if (!(theta > 0 && theta < 1)) throw ConfigError("theta must lie in (0, 1)");
        if (disturbance == DisturbanceKind::bernoulli && target_vehicle.empty())
            throw ConfigError("target_vehicle is required with the bernoulli model");
        if (mode == CriteriaMode::single_target && target_vehicle.empty())
            throw ConfigError("target_vehicle is required in single_target mode");
        if (lost_frames < 1) throw ConfigError("lost_frames must be >= 1");
        if (!(alpha > 0)) throw ConfigError("alpha must be > 0");
        if (horizon < 0) throw ConfigError("horizon must be >= 0");
        if (min_prediction_history < 2) throw ConfigError("min_prediction_history must be >= 2");
    }

    bool tracking_criteria() const { return mode != CriteriaMode::prediction_only; }
    int prediction_top_k() const { return mode == CriteriaMode::single_target ? 1 : predictor.top_k; }

    friend bool operator==(const HarnessConfig&, const HarnessConfig&) = default;
};

struct FailureRecord {
    std::string scenario_id;
    FailureKind kind{FailureKind::track_error};
    /// Frame index at which the failure was observed; the record holds step + 1 actions.
    int step{0};
    std::string vehicle_id;
    std::vector<DisturbanceAction> actions;
    /// Explicit point removals per step (adversarial baseline only; empty for seeded actions).
    std::vector<std::vector<std::uint32_t>> removals;
    double log_likelihood{0.0};
    double delta{0.0};
    double Delta{0.0};
    int trajectory_length{0};
    /// The measured quantity that crossed its threshold (position error or FDE, meters;
    /// consecutive unmatched frames for a lost track).
    double value{0.0};

    friend bool operator==(const FailureRecord&, const FailureRecord&) = default;
};

struct FailureEvent {
    int vehicle{0};
    FailureKind kind{FailureKind::track_error};
    double value{0.0};
    auto operator<=>(const FailureEvent&) const = default;
};

/// (vehicle index, kind) pairs that fail without any disturbance.
using FailureMask = std::set<std::pair<int, FailureKind>>;

struct VehicleStatus {
    bool observed{false};
    int observations{0};
    int unmatched_streak{0};
    friend bool operator==(const VehicleStatus&, const VehicleStatus&) = default;
};

/// What the evaluator saw for one vehicle in the last stepped frame (NaN when not applicable).
struct VehicleEval {
    bool matched{false};
    double position_error{std::numeric_limits<double>::quiet_NaN()};
    double fde{std::numeric_limits<double>::quiet_NaN()};
    /// Heading error of the nearest detection within the evaluation gate.
    double heading_error{std::numeric_limits<double>::quiet_NaN()};
};

struct StepLog {
    double log_likelihood{0.0};
    DisturbanceCounts counts;
    std::size_t total_points{0};
    /// Per vehicle: points inside its box removed in this step.
    std::vector<int> removed_in_box;
    friend bool operator==(const StepLog&, const StepLog&) = default;
};

struct SimState {
    int t{0};
    TrackSet tracks;
    /// Track id -> posterior positions of previous frames, most recent first.
    std::map<int, std::vector<Vec3>> history;
    std::vector<DisturbanceAction> actions;
    std::vector<std::vector<std::uint32_t>> removals;
    double log_likelihood{0.0};
    std::shared_ptr<const FailureMask> mask;
    std::vector<VehicleStatus> vehicles;
    std::vector<StepLog> log;
    /// Detections of the last stepped frame, world frame.
    std::vector<Detection> detections;
    /// Unmasked failure events of the last stepped frame.
    std::vector<FailureEvent> events;
    std::vector<VehicleEval> eval;
    std::optional<FailureRecord> failure;

    bool operator==(const SimState& o) const {
        const bool masks = mask == o.mask || (mask && o.mask && *mask == *o.mask);
        return masks && t == o.t && tracks == o.tracks && history == o.history && actions == o.actions &&
               removals == o.removals && log_likelihood == o.log_likelihood && vehicles == o.vehicles &&
               log == o.log && detections == o.detections && events == o.events && failure == o.failure;
    }
};

class PerceptionHarness {
public:
    using State = SimState;
    using Action = DisturbanceAction;

    PerceptionHarness(std::shared_ptr<const Scenario> scenario, HarnessConfig config)
        : scenario_(std::move(scenario)), config_(std::move(config)) {
        if (!scenario_) throw ContractViolation("harness: null scenario");
        if (auto err = check_invariants(*scenario_)) throw ConfigError("scenario: " + *err);
        config_.validate();
        const Scenario& s = *scenario_;
        horizon_ = static_cast<int>(s.frame_count());
        if (config_.horizon > 0) horizon_ = std::min(horizon_, config_.horizon);
        if (!config_.target_vehicle.empty()) {
            target_ = s.vehicle_index(config_.target_vehicle);
            if (target_ < 0) throw ConfigError("target_vehicle '" + config_.target_vehicle + "' not in scenario");
        }
        candidates_ = build_candidates(config_.predictor);
        future_frames_ = static_cast<int>(std::llround(config_.predictor.horizon / s.frame_period));

        if (config_.disturbance == DisturbanceKind::rain) {
            for (double r : config_.rain.rate_set) models_.push_back(RainModel{r});
        } else {
            models_.push_back(BernoulliModel{config_.theta});
        }

        const std::size_t nv = s.vehicles.size();
        frames_.resize(horizon_);
        for (int k = 0; k < horizon_; ++k) {
            auto& f = frames_[k];
            const auto& cloud = s.frames[k];
            f.in_box.resize(nv);
            f.clean_points.assign(nv, 0);
            for (std::size_t v = 0; v < nv; ++v) {
                const OrientedBox box = s.vehicles[v].box_at(k);
                f.truth_xy.push_back({box.center.x, box.center.y, box.center.z});
                f.boxes.push_back(box_in_ego(s.ego_poses[k], box));
            }
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                if (cloud.flags[i] == PointFlag::removed) continue;
                for (std::size_t v = 0; v < nv; ++v) {
                    if (!f.boxes[v].contains(cloud.points[i], kBoxMargin)) continue;
                    f.in_box[v].push_back(static_cast<std::uint32_t>(i));
                    if (cloud.points[i].z >= config_.detector.ground_z) ++f.clean_points[v];
                }
            }
        }
        mask_ = std::make_shared<const FailureMask>(clean_run_failures());
    }

    const Scenario& scenario() const { return *scenario_; }
    const HarnessConfig& config() const { return config_; }
    int horizon() const { return horizon_; }
    const FailureMask& baseline_mask() const { return *mask_; }
    const CandidateSet& candidates() const { return candidates_; }

    /// Disturbance models the search may select (rain rates, or the single Bernoulli model).
    std::size_t model_count() const { return models_.size(); }
    Action make_action(std::size_t model_index, std::uint64_t seed) const {
        return {models_.at(model_index), seed};
    }

    /// Clean points (above the ground threshold) inside a vehicle's box at a frame.
    int clean_points(int frame, int vehicle) const { return frames_.at(frame).clean_points.at(vehicle); }
    /// Indices of the frame's points inside a vehicle's box (0.05 m margin).
    const std::vector<std::uint32_t>& in_box_points(int frame, int vehicle) const {
        return frames_.at(frame).in_box.at(vehicle);
    }
    const OrientedBox& ego_box(int frame, int vehicle) const { return frames_.at(frame).boxes.at(vehicle); }
    int target_index() const { return target_; }

    State initialize() const {
        State s;
        s.mask = mask_;
        s.vehicles.assign(scenario_->vehicles.size(), {});
        s.eval.assign(scenario_->vehicles.size(), {});
        return s;
    }

    bool is_terminal(const State& s) const { return s.t >= horizon_ || s.failure.has_value(); }
    const std::optional<FailureRecord>& failure(const State& s) const { return s.failure; }

    /// Per-state reward: 0 on reaching a failure, -alpha on reaching the horizon without one,
    /// otherwise the log-likelihood of the action taken from `s`.
    double reward(const State& s, double log_likelihood) const {
        if (s.failure) return 0.0;
        if (is_terminal(s)) return -config_.alpha;
        return log_likelihood;
    }

    /// Samples the disturbance for frame t and advances the perception pipeline one frame.
    std::pair<State, double> step(const State& s, const Action& action) const {
        require_steppable(s);
        const PointCloud& cloud = scenario_->frames[s.t];
        auto outcome = apply_disturbance(cloud, action, disturbance_box(s.t), config_.rain);
        const double ll = outcome.log_likelihood;
        State next = advance(s, outcome);
        next.actions.push_back(action);
        if (!s.removals.empty()) next.removals.push_back({});
        finish(next);
        return {std::move(next), ll};
    }

    /// Advances with an explicit set of removed points (adversarial baseline). The step is
    /// scored as Bernoulli(theta) removals over the evaluated vehicles' in-box points.
    std::pair<State, double> step_with_removals(const State& s, std::vector<std::uint32_t> removed) const {
        require_steppable(s);
        const PointCloud& cloud = scenario_->frames[s.t];
        std::sort(removed.begin(), removed.end());
        removed.erase(std::unique(removed.begin(), removed.end()), removed.end());
        DisturbanceOutcome outcome;
        outcome.cloud = cloud;
        outcome.range_offsets.assign(cloud.size(), 0.0);
        for (auto i : removed) {
            if (i >= cloud.size()) throw ContractViolation("step_with_removals: point index out of range");
            outcome.cloud.flags[i] = PointFlag::removed;
        }
        outcome.counts.removed = removed.size();
        std::size_t eligible = 0;
        for (int v : evaluated_vehicles()) eligible += frames_[s.t].in_box[v].size();
        outcome.eligible = eligible;
        if (removed.size() > eligible) throw ContractViolation("step_with_removals: more removals than eligible points");
        outcome.log_likelihood = eligible == 0 ? 0.0 : detail::bernoulli_log_likelihood(eligible, removed.size(), config_.theta);
        const double ll = outcome.log_likelihood;
        State next = advance(s, outcome);
        next.removals = s.removals;
        next.removals.resize(s.actions.size());
        next.removals.push_back(std::move(removed));
        next.actions.push_back({BernoulliModel{config_.theta}, 0});
        finish(next);
        return {std::move(next), ll};
    }

    /// Runs a recorded action sequence (or removal sequence) from a fresh state.
    State replay(const FailureRecord& record) const {
        if (record.scenario_id != scenario_->scenario_id)
            throw IntegrityError("record belongs to scenario '" + record.scenario_id + "', not '" +
                                 scenario_->scenario_id + "'");
        State s = initialize();
        for (std::size_t k = 0; k < record.actions.size(); ++k) {
            if (is_terminal(s)) throw IntegrityError("record has actions past the end of the episode");
            s = !record.removals.empty() ? step_with_removals(s, record.removals.at(k)).first
                                 : step(s, record.actions[k]).first;
        }
        return s;
    }

    /// The vehicles whose failures count (the target in single_target mode, otherwise all).
    std::vector<int> evaluated_vehicles() const {
        if (config_.mode == CriteriaMode::single_target) return {target_};
        std::vector<int> all(scenario_->vehicles.size());
        for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<int>(v);
        return all;
    }

    /// Runs perception on a (possibly modified) ego-frame cloud: detections in the world frame.
    std::vector<Detection> world_detections(const PointCloud& cloud, int frame) const {
        auto dets = detect(cloud, config_.detector);
        const Pose2p5D& ego = scenario_->ego_poses[frame];
        for (auto& d : dets) {
            d.center = ego_to_world(ego, d.center);
            d.yaw = wrap_angle(d.yaw + ego.yaw);
        }
        return dets;
    }

private:
    static constexpr double kBoxMargin = 0.05;

    struct FrameContext {
        std::vector<OrientedBox> boxes;  // ego frame
        std::vector<Vec3> truth_xy;      // world-frame box centers
        std::vector<std::vector<std::uint32_t>> in_box;
        std::vector<int> clean_points;
    };

    void require_steppable(const State& s) const {
        if (is_terminal(s)) throw ContractViolation("step: state is terminal");
    }

    OrientedBox disturbance_box(int frame) const {
        if (target_ < 0) return {};
        OrientedBox b = frames_[frame].boxes[target_];
        b.extent.length += 2 * kBoxMargin;
        b.extent.width += 2 * kBoxMargin;
        b.extent.height += 2 * kBoxMargin;
        return b;
    }

    /// Perception update and failure evaluation; `events` holds every event of this frame.
    State advance(const State& s, const DisturbanceOutcome& outcome) const {
        const int t = s.t;
        const auto& ctx = frames_[t];
        State next = s;
        next.failure.reset();
        next.t = t + 1;
        next.log_likelihood += outcome.log_likelihood;

        StepLog log;
        log.log_likelihood = outcome.log_likelihood;
        log.counts = outcome.counts;
        log.total_points = outcome.cloud.size();
        log.removed_in_box.assign(ctx.in_box.size(), 0);
        for (std::size_t v = 0; v < ctx.in_box.size(); ++v)
            for (auto i : ctx.in_box[v]) log.removed_in_box[v] += outcome.cloud.flags[i] == PointFlag::removed;
        next.log.push_back(std::move(log));

        next.detections = world_detections(outcome.cloud, t);
        next.tracks = track_step(s.tracks, next.detections, scenario_->frame_period, t, config_.tracker);
        next.events = evaluate(next, t);

        // Track histories: this frame's posterior becomes history for the next frame.
        std::map<int, std::vector<Vec3>> history;
        const auto keep = static_cast<std::size_t>(std::max(config_.predictor.history_length, config_.min_prediction_history));
        for (const auto& tr : next.tracks.tracks) {
            std::vector<Vec3> h{tr.position()};
            if (auto it = s.history.find(tr.track_id); it != s.history.end())
                h.insert(h.end(), it->second.begin(), it->second.begin() + std::min(keep - 1, it->second.size()));
            history.emplace(tr.track_id, std::move(h));
        }
        next.history = std::move(history);
        return next;
    }

    std::vector<FailureEvent> evaluate(State& next, int t) const {
        const auto& ctx = frames_[t];
        const Scenario& sc = *scenario_;
        const std::size_t nv = sc.vehicles.size();

        std::vector<int> reported;
        for (std::size_t i = 0; i < next.tracks.tracks.size(); ++i)
            if (is_reported(next.tracks.tracks[i], config_.tracker)) reported.push_back(static_cast<int>(i));
        std::vector<std::vector<double>> cost(reported.size(), std::vector<double>(nv));
        for (std::size_t r = 0; r < reported.size(); ++r) {
            const Vec3 p = next.tracks.tracks[reported[r]].position();
            for (std::size_t v = 0; v < nv; ++v)
                cost[r][v] = std::hypot(p.x - ctx.truth_xy[v].x, p.y - ctx.truth_xy[v].y);
        }
        const Assignment a = gated_assignment(cost, nv, config_.eval_gate);
        std::vector<int> track_of(nv, -1);
        std::vector<double> error(nv, 0.0);
        for (auto [r, v] : a.matches) {
            track_of[v] = reported[r];
            error[v] = cost[r][v];
        }

        std::vector<char> evaluated(nv, 0);
        for (int v : evaluated_vehicles()) evaluated[v] = 1;
        const int top_k = config_.prediction_top_k();
        const bool future_known = t + future_frames_ < static_cast<int>(sc.frame_count());

        std::vector<FailureEvent> events;
        for (std::size_t v = 0; v < nv; ++v) {
            auto& st = next.vehicles[v];
            const int vi = static_cast<int>(v);
            auto& ev = next.eval[v];
            ev = {};
            double nearest = config_.eval_gate;
            for (const auto& d : next.detections) {
                const double dist = std::hypot(d.center.x - ctx.truth_xy[v].x, d.center.y - ctx.truth_xy[v].y);
                if (dist <= nearest) {
                    nearest = dist;
                    ev.heading_error = std::abs(wrap_angle(d.yaw - sc.vehicles[v].poses[t].yaw));
                }
            }
            if (track_of[v] >= 0) {
                ev.matched = true;
                ev.position_error = error[v];
                st.observed = true;
                ++st.observations;
                st.unmatched_streak = 0;
            } else if (st.observed && ctx.clean_points[v] >= config_.detector.min_points) {
                ++st.unmatched_streak;
            } else {
                st.unmatched_streak = 0;
            }
            if (!evaluated[v]) continue;
            if (config_.tracking_criteria()) {
                if (track_of[v] >= 0 && error[v] > config_.position_error_threshold)
                    events.push_back({vi, FailureKind::track_error, error[v]});
                if (st.unmatched_streak >= config_.lost_frames)
                    events.push_back({vi, FailureKind::track_lost, double(st.unmatched_streak)});
            }
            if (track_of[v] < 0 || sc.vehicles[v].parked || !future_known) continue;
            const Track& tr = next.tracks.tracks[track_of[v]];
            const auto it = next.history.find(tr.track_id);
            if (it == next.history.end() ||
                static_cast<int>(it->second.size()) < config_.min_prediction_history)
                continue;
            const auto pred = predict(tr, it->second, candidates_, sc.frame_period, config_.predictor, false);
            if (!pred) continue;
            const Pose2p5D& truth = sc.vehicles[v].poses[t + future_frames_];
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < top_k && k < static_cast<int>(pred->ranked.size()); ++k)
                best = std::min(best, distance(pred->ranked[k].points.back(), {truth.x, truth.y}));
            ev.fde = best;
            if (best > config_.fde_threshold) events.push_back({vi, FailureKind::prediction_fde, best});
        }
        return events;
    }

    /// Drops masked events and records the first remaining one as the failure.
    void finish(State& s) const {
        std::erase_if(s.events, [&](const FailureEvent& e) { return s.mask->contains({e.vehicle, e.kind}); });
        std::sort(s.events.begin(), s.events.end());
        if (s.events.empty()) return;
        const FailureEvent& e = s.events.front();
        FailureRecord r;
        r.scenario_id = scenario_->scenario_id;
        r.kind = e.kind;
        r.step = s.t - 1;
        r.vehicle_id = scenario_->vehicles[e.vehicle].vehicle_id;
        r.actions = s.actions;
        r.removals = s.removals;
        r.log_likelihood = s.log_likelihood;
        r.trajectory_length = s.vehicles[e.vehicle].observations;
        r.value = e.value;
        std::tie(r.delta, r.Delta) = disturbance_magnitudes(s, e.vehicle);
        s.failure = std::move(r);
    }

    /// (delta, Delta) averaged over disturbed frames, i.e. frames where any point changed.
    std::pair<double, double> disturbance_magnitudes(const State& s, int vehicle) const {
        double local = 0.0, global = 0.0;
        int local_n = 0, global_n = 0;
        for (std::size_t k = 0; k < s.log.size(); ++k) {
            const auto& l = s.log[k];
            if (l.counts.total() == 0) continue;
            if (l.total_points > 0) {
                global += double(l.counts.total()) / double(l.total_points);
                ++global_n;
            }
            const auto in_box = frames_[k].in_box[vehicle].size();
            if (in_box > 0) {
                local += double(l.removed_in_box[vehicle]) / double(in_box);
                ++local_n;
            }
        }
        return {local_n ? local / local_n : 0.0, global_n ? global / global_n : 0.0};
    }

    /// Runs the whole horizon without disturbances and collects every failing pair.
    FailureMask clean_run_failures() const {
        FailureMask mask;
        State s = initialize();
        s.mask = std::make_shared<const FailureMask>();
        for (int k = 0; k < horizon_; ++k) {
            DisturbanceOutcome identity;
            identity.cloud = scenario_->frames[k];
            identity.range_offsets.assign(identity.cloud.size(), 0.0);
            s = advance(s, identity);
            for (const auto& e : s.events) mask.insert({e.vehicle, e.kind});
        }
        return mask;
    }

    std::shared_ptr<const Scenario> scenario_;
    HarnessConfig config_;
    int horizon_{0};
    int target_{-1};
    int future_frames_{0};
    CandidateSet candidates_;
    std::vector<std::variant<BernoulliModel, RainModel>> models_;
    std::vector<FrameContext> frames_;
    std::shared_ptr<const FailureMask> mask_;
};

}  // namespace past
