#pragma once

// Failure search over a harness MDP: MCTS with double progressive widening, Monte Carlo random
// search, and the modified ISO point-removal baseline.
//
// A harness exposes initialize / step / is_terminal / failure / reward and a discrete set of
// disturbance models addressed by index; an action is (model index, 64-bit seed). Transitions are
// deterministic in (state, action), so the tree stores states at its edges and state widening is
// not needed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "past/detector.hpp"
#include "past/errors.hpp"
#include "past/harness.hpp"

namespace past {

template <class H>
concept SearchHarness = requires(const H& h, const typename H::State& s, const typename H::Action& a) {
    { h.initialize() } -> std::same_as<typename H::State>;
    { h.step(s, a) } -> std::same_as<std::pair<typename H::State, double>>;
    { h.is_terminal(s) } -> std::convertible_to<bool>;
    { h.failure(s).has_value() } -> std::convertible_to<bool>;
    { h.reward(s, 0.0) } -> std::convertible_to<double>;
    { h.model_count() } -> std::convertible_to<std::size_t>;
    { h.make_action(std::size_t{}, std::uint64_t{}) } -> std::same_as<typename H::Action>;
    { a == a } -> std::convertible_to<bool>;
};

template <class H>
using failure_of = std::remove_cvref_t<decltype(*std::declval<const H&>().failure(
    std::declval<const typename H::State&>()))>;

template <class Failure = FailureRecord>
struct SearchResult {
    std::optional<Failure> best_failure;
    /// Best episode return seen: sum of action log-likelihoods for a failure, with -alpha added
    /// when no failure was reached. -inf when no episode ran.
    double best_return{-std::numeric_limits<double>::infinity()};
    int iterations{0};
    double wall_time{0.0};
    /// Best return after each iteration.
    std::vector<double> trace;
};

struct MctsParams {
    int iterations{2000};
    /// UCB constant. With normalize_values it weighs values rescaled to [0, 1].
    double exploration{1.4142135623730951};
    double k_action{3.0};
    double alpha_action{0.5};
    /// Draws allowed when widening before giving up on finding a new action.
    int max_duplicate_draws{64};
    /// Rescale edge values by the min and max seen anywhere in the tree before the UCB bonus.
    /// Returns span alpha (1e5) while likelihood differences are a few nats, so raw values need
    /// an exploration constant of the same scale.
    bool normalize_values{true};
    friend bool operator==(const MctsParams&, const MctsParams&) = default;
};

struct IsoParams {
    int budget{100};
    int batch{5};
    friend bool operator==(const IsoParams&, const IsoParams&) = default;
};

namespace detail {

template <SearchHarness H>
typename H::Action random_action(const H& h, std::mt19937_64& gen) {
    const auto model = static_cast<std::size_t>(gen() % h.model_count());
    return h.make_action(model, gen());
}

/// Tracks the best episode and the per-iteration trace.
template <SearchHarness H>
struct BestTracker {
    SearchResult<failure_of<H>> result;

    void offer(const H& h, const typename H::State& terminal, double ret) {
        const auto& f = h.failure(terminal);
        const bool better_failure = f && (!result.best_failure || ret > result.best_return);
        const bool better_plain = !f && !result.best_failure && ret > result.best_return;
        if (better_failure) result.best_failure = *f;
        if (better_failure || better_plain) result.best_return = ret;
    }
    void end_iteration() {
        ++result.iterations;
        result.trace.push_back(result.best_return);
    }
};

/// Random rollout to a terminal state. Returns the terminal state and the return collected from
/// `s` onward, including the terminal reward.
template <SearchHarness H>
std::pair<typename H::State, double> rollout(const H& h, typename H::State s, std::mt19937_64& gen) {
    double ret = 0.0;
    while (!h.is_terminal(s)) {
        auto [next, ll] = h.step(s, random_action(h, gen));
        ret += h.reward(s, ll);
        s = std::move(next);
    }
    ret += h.reward(s, 0.0);
    return {std::move(s), ret};
}

}  // namespace detail

/// Tree node keyed by its action prefix. `visits` counts simulations through the node; each one
/// passes to exactly one child, so visits equals the sum of child visits.
template <class State, class Action>
struct MctsNode {
    struct Edge {
        Action action;
        State state;
        double reward{0.0};
        int visits{0};
        double value{0.0};
        std::unique_ptr<MctsNode> child;
    };
    int visits{0};
    int depth{0};
    std::vector<Edge> edges;
};

/// Checks the widening bound on every node: children <= ceil(k * N^alpha).
template <class Node>
bool widening_respected(const Node& node, const MctsParams& params) {
    const double bound = std::ceil(params.k_action * std::pow(std::max(node.visits, 0), params.alpha_action));
    if (static_cast<double>(node.edges.size()) > bound) return false;
    for (const auto& e : node.edges)
        if (e.child && !widening_respected(*e.child, params)) return false;
    return true;
}

template <SearchHarness H>
class MctsDpw {
public:
    using State = typename H::State;
    using Action = typename H::Action;
    using Node = MctsNode<State, Action>;

    MctsDpw(const H& harness, MctsParams params, std::uint64_t master_seed)
        : h_(harness), params_(params), gen_(master_seed) {
        if (params_.iterations < 0) throw ConfigError("mcts: iterations must be >= 0");
        if (!(params_.k_action > 0) || params_.alpha_action < 0)
            throw ConfigError("mcts: widening requires k > 0 and alpha >= 0");
        if (!(params_.exploration >= 0)) throw ConfigError("mcts: exploration must be >= 0");
    }

    SearchResult<failure_of<H>> run() {
        const auto start = std::chrono::steady_clock::now();
        detail::BestTracker<H> best;
        root_ = std::make_unique<Node>();
        const State init = h_.initialize();
        for (int i = 0; i < params_.iterations; ++i) {
            simulate(*root_, init, best);
            best.end_iteration();
        }
        best.result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return best.result;
    }

    const Node* root() const { return root_.get(); }

private:
    /// One simulation from `node` (whose state is `s`). Returns the return from `s` onward.
    double simulate(Node& node, const State& s, detail::BestTracker<H>& best) {
        if (h_.is_terminal(s)) {
            const double r = h_.reward(s, 0.0);
            best.offer(h_, s, r + prefix_);
            return r;
        }
        ++node.visits;
        typename Node::Edge* edge = nullptr;
        bool fresh = false;
        if (static_cast<double>(node.edges.size()) <
            params_.k_action * std::pow(static_cast<double>(node.visits), params_.alpha_action)) {
            if (auto a = new_action(node)) {
                auto [next, ll] = h_.step(s, *a);
                const double r = h_.reward(s, ll);
                node.edges.push_back({std::move(*a), std::move(next), r, 0, 0.0, nullptr});
                edge = &node.edges.back();
                fresh = true;
            }
        }
        if (!edge) edge = &select(node);

        double ret = 0.0;
        const double saved = prefix_;
        prefix_ += edge->reward;
        if (fresh) {
            auto [terminal, tail] = detail::rollout(h_, edge->state, gen_);
            best.offer(h_, terminal, prefix_ + tail);
            ret = edge->reward + tail;
        } else {
            if (!edge->child) {
                edge->child = std::make_unique<Node>();
                edge->child->depth = node.depth + 1;
            }
            ret = edge->reward + simulate(*edge->child, edge->state, best);
        }
        prefix_ = saved;
        ++edge->visits;
        edge->value += (ret - edge->value) / edge->visits;
        lo_ = std::min(lo_, edge->value);
        hi_ = std::max(hi_, edge->value);
        return ret;
    }

    std::optional<Action> new_action(const Node& node) {
        for (int draw = 0; draw < params_.max_duplicate_draws; ++draw) {
            Action a = detail::random_action(h_, gen_);
            const bool dup = std::any_of(node.edges.begin(), node.edges.end(),
                                         [&](const auto& e) { return e.action == a; });
            if (!dup) return a;
        }
        return std::nullopt;
    }

    typename Node::Edge& select(Node& node) {
        const double log_n = std::log(static_cast<double>(node.visits));
        typename Node::Edge* pick = &node.edges.front();
        double top = -std::numeric_limits<double>::infinity();
        for (auto& e : node.edges) {
            double q = e.value;
            if (params_.normalize_values) q = hi_ > lo_ ? (e.value - lo_) / (hi_ - lo_) : 0.0;
            const double ucb = e.visits == 0 ? std::numeric_limits<double>::infinity()
                                             : q + params_.exploration * std::sqrt(log_n / e.visits);
            if (ucb > top) {
                top = ucb;
                pick = &e;
            }
        }
        return *pick;
    }

    const H& h_;
    MctsParams params_;
    std::mt19937_64 gen_;
    std::unique_ptr<Node> root_;
    /// Return accumulated from the root to the node being simulated.
    double prefix_{0.0};
    double lo_{std::numeric_limits<double>::infinity()};
    double hi_{-std::numeric_limits<double>::infinity()};
};

template <SearchHarness H>
SearchResult<failure_of<H>> mcts_dpw_search(const H& harness, const MctsParams& params, std::uint64_t master_seed) {
    return MctsDpw<H>(harness, params, master_seed).run();
}

/// Independent random rollouts; keeps the most likely failure.
template <SearchHarness H>
SearchResult<failure_of<H>> mc_search(const H& harness, int iterations, std::uint64_t master_seed) {
    if (iterations < 0) throw ConfigError("mc: iterations must be >= 0");
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 gen(master_seed);
    detail::BestTracker<H> best;
    const auto init = harness.initialize();
    for (int i = 0; i < iterations; ++i) {
        auto [terminal, ret] = detail::rollout(harness, init, gen);
        best.offer(harness, terminal, ret);
        best.end_iteration();
    }
    best.result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return best.result;
}

struct IsoFrame {
    int frame{0};
    int iterations{0};
    std::vector<std::uint32_t> removed;
    /// Evaluated vehicles still detected after the removals.
    int target_detections{0};
};

struct IsoResult {
    SearchResult<FailureRecord> search;
    std::vector<IsoFrame> frames;
    /// Final episode state (failure or horizon).
    SimState final_state;
};

namespace detail {

/// Clusters owning at least one in-box point of an evaluated vehicle, for one frame cloud.
struct IsoView {
    DetectionSet set;
    /// For each evaluated vehicle, whether some detection owns one of its remaining points.
    std::vector<char> detected;
};

inline IsoView iso_view(const PointCloud& cloud, const std::vector<std::vector<std::uint32_t>>& in_box,
                        const DetectorParams& params) {
    IsoView view;
    view.set = detect_with_members(cloud, params);
    std::vector<char> owned(cloud.size(), 0);
    for (const auto& m : view.set.members)
        for (auto i : m) owned[i] = 1;
    for (const auto& pts : in_box) {
        bool any = false;
        for (auto i : pts)
            if (cloud.flags[i] != PointFlag::removed && owned[i]) any = true;
        view.detected.push_back(any);
    }
    return view;
}

/// Confidence of the detection left after removing `drop` from a cluster: the strongest
/// sub-cluster, or 0 when nothing survives.
inline double confidence_without(const PointCloud& cloud, const std::vector<std::size_t>& members,
                                 std::size_t drop, const DetectorParams& params) {
    PointCloud sub;
    for (auto i : members)
        if (i != drop) sub.push(cloud.points[i]);
    double best = 0.0;
    std::vector<Vec3> pts;
    for (const auto& cl : cluster(sub, params)) {
        pts.clear();
        for (auto i : cl) pts.push_back(sub.points[i]);
        best = std::max(best, fit_box(pts, params).confidence);
    }
    return best;
}

}  // namespace detail

/// Adversarial baseline: per frame, repeatedly removes the in-box points of the evaluated
/// vehicles whose removal most lowers the confidence of their detection, `batch` per iteration,
/// until a vehicle detected on the clean frame is missed or the iteration budget is spent. Ties
/// go to the weakest detection, then the lowest point index. Each frame is scored as Bernoulli
/// removals over the evaluated vehicles' in-box points.
inline IsoResult iso_attack(const PerceptionHarness& h, const IsoParams& params = {}) {
    if (params.budget < 0 || params.batch < 1) throw ConfigError("iso: budget >= 0 and batch >= 1 required");
    const auto start = std::chrono::steady_clock::now();
    const auto& det = h.config().detector;
    const auto evaluated = h.evaluated_vehicles();
    IsoResult out;
    SimState s = h.initialize();
    double ret = 0.0;
    while (!h.is_terminal(s)) {
        const int t = s.t;
        PointCloud cloud = h.scenario().frames[t];
        std::vector<std::vector<std::uint32_t>> in_box;
        for (int v : evaluated) in_box.push_back(h.in_box_points(t, v));

        IsoFrame frame{t, 0, {}, 0};
        auto view = detail::iso_view(cloud, in_box, det);
        const std::vector<char> clean_detected = view.detected;
        auto missed = [&](const detail::IsoView& vw) {
            for (std::size_t k = 0; k < vw.detected.size(); ++k)
                if (clean_detected[k] && !vw.detected[k]) return true;
            return false;
        };
        const bool any_detected = std::any_of(clean_detected.begin(), clean_detected.end(), [](char c) { return c; });

        while (any_detected && frame.iterations < params.budget && !missed(view)) {
            ++frame.iterations;
            std::vector<std::ptrdiff_t> owner(cloud.size(), -1);
            for (std::size_t d = 0; d < view.set.members.size(); ++d)
                for (auto i : view.set.members[d]) owner[i] = static_cast<std::ptrdiff_t>(d);
            struct Ranked {
                double salience;
                double owner_confidence;
                std::uint32_t index;
            };
            std::vector<Ranked> ranked;
            for (const auto& pts : in_box)
                for (auto i : pts) {
                    if (cloud.flags[i] == PointFlag::removed || owner[i] < 0) continue;
                    const auto d = static_cast<std::size_t>(owner[i]);
                    const double conf = view.set.detections[d].confidence;
                    ranked.push_back({conf - detail::confidence_without(cloud, view.set.members[d], i, det), conf, i});
                }
            if (ranked.empty()) break;
            std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
                if (a.salience != b.salience) return a.salience > b.salience;
                if (a.owner_confidence != b.owner_confidence) return a.owner_confidence < b.owner_confidence;
                return a.index < b.index;
            });
            ranked.erase(std::unique(ranked.begin(), ranked.end(),
                                     [](const Ranked& a, const Ranked& b) { return a.index == b.index; }),
                         ranked.end());
            const int take = std::min<int>(params.batch, static_cast<int>(ranked.size()));
            for (int k = 0; k < take; ++k) {
                cloud.flags[ranked[k].index] = PointFlag::removed;
                frame.removed.push_back(ranked[k].index);
                view = detail::iso_view(cloud, in_box, det);
                if (missed(view)) break;
            }
        }
        for (char d : view.detected) frame.target_detections += d;
        auto [next, ll] = h.step_with_removals(s, frame.removed);
        ret += h.reward(s, ll);
        s = std::move(next);
        out.frames.push_back(std::move(frame));
    }
    ret += h.reward(s, 0.0);
    out.search.best_return = ret;
    if (s.failure) out.search.best_failure = *s.failure;
    out.search.iterations = 0;
    for (const auto& f : out.frames) out.search.iterations += f.iterations;
    out.search.trace.push_back(ret);
    out.search.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.final_state = std::move(s);
    return out;
}

}  // namespace past
