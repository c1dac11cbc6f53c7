#pragma once

// Seeded, likelihood-accounted LiDAR disturbances.
//
// Bernoulli: every point inside a target box is removed independently with probability theta.
// Rain: per point at range r, with alpha = extinction_coeff_scale * rate^0.6,
//   reflected   p_scat = 1 - exp(-scatter_coeff * alpha * r), new range ~ U[0.05 r, r]
//   removed     (1 - p_scat) * p_lost,  p_lost = 1 - exp(-2 alpha r)
//   retained    (1 - p_scat) * (1 - p_lost), range noise ~ N(0, sigma^2), sigma = noise_scale * sqrt(rate)
// Continuous draws are scored by the density of their standardized variate by default (the
// normal z-score, the uniform fraction of [0.05 r, r]), which keeps every per-point term <= 0.
// With standardized_density = false they are scored per meter and terms may be positive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "past/errors.hpp"
#include "past/geometry.hpp"
#include "past/rng.hpp"
#include "past/scene.hpp"

namespace past {

struct RainParams {
    double extinction_coeff_scale{4e-4};
    double noise_scale{0.02};
    double scatter_coeff{0.15};
    std::vector<double> rate_set{5.0, 10.0, 15.0};
    bool standardized_density{true};

    void validate() const {
        if (!(extinction_coeff_scale > 0 && noise_scale > 0 && scatter_coeff > 0))
            throw ConfigError("rain: all scales must be > 0");
        if (rate_set.empty()) throw ConfigError("rain: rate_set must be nonempty");
        for (double r : rate_set)
            if (!(r > 0)) throw ConfigError("rain: rate_set values must be > 0");
    }

    double alpha(double rate) const { return extinction_coeff_scale * std::pow(rate, 0.6); }
    double sigma(double rate) const { return noise_scale * std::sqrt(rate); }

    friend bool operator==(const RainParams&, const RainParams&) = default;
};

struct BernoulliModel {
    double theta{0.1};
    friend bool operator==(const BernoulliModel&, const BernoulliModel&) = default;
};

struct RainModel {
    double rate{0.0};
    friend bool operator==(const RainModel&, const RainModel&) = default;
};

/// The search action: a model selection parameter plus the seed driving all draws.
struct DisturbanceAction {
    std::variant<BernoulliModel, RainModel> model{RainModel{}};
    std::uint64_t seed{0};
    friend bool operator==(const DisturbanceAction&, const DisturbanceAction&) = default;
};

struct DisturbanceCounts {
    std::size_t removed{0};
    std::size_t noised{0};
    std::size_t reflected{0};
    std::size_t total() const { return removed + noised + reflected; }
    friend bool operator==(const DisturbanceCounts&, const DisturbanceCounts&) = default;
};

struct DisturbanceOutcome {
    PointCloud cloud;
    double log_likelihood{0.0};
    DisturbanceCounts counts;
    /// Noised: signed range noise. Reflected: the new range. Otherwise 0.
    std::vector<double> range_offsets;
    /// Bernoulli only: number of points eligible for removal (inside the target box).
    std::size_t eligible{0};
    friend bool operator==(const DisturbanceOutcome&, const DisturbanceOutcome&) = default;
};

namespace detail {

inline constexpr std::uint64_t kScatterStream = 0;
inline constexpr std::uint64_t kLostStream = 1;
inline constexpr std::uint64_t kReflectStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;  // uses 3 and 4
inline constexpr std::uint64_t kBernoulliStream = 8;

inline double log_normal_pdf(double x, double sigma) {
    const double z = x / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * kPi);
}

struct RainTerms {
    double p_scat;
    double p_lost;
    double sigma;
    bool standardized;
};

inline RainTerms rain_terms(const RainParams& params, double rate, double range) {
    const double a = params.alpha(rate);
    return {-std::expm1(-params.scatter_coeff * a * range), -std::expm1(-2.0 * a * range),
            params.sigma(rate), params.standardized_density};
}

/// Log-probability of one point's rain outcome. Shared by the sampler and the audit.
inline double rain_point_log_prob(PointFlag flag, double range, double offset, const RainTerms& t) {
    switch (flag) {
        case PointFlag::reflected:
            return std::log(t.p_scat) - (t.standardized ? 0.0 : std::log(0.95 * range));
        case PointFlag::removed:
            return std::log1p(-t.p_scat) + std::log(t.p_lost);
        case PointFlag::noised:
            return std::log1p(-t.p_scat) + std::log1p(-t.p_lost) +
                   log_normal_pdf(offset, t.sigma) + (t.standardized ? std::log(t.sigma) : 0.0);
        case PointFlag::original:
            return std::log1p(-t.p_scat) + std::log1p(-t.p_lost);
    }
    return 0.0;
}

inline double bernoulli_log_likelihood(std::size_t m, std::size_t n, double theta) {
    return static_cast<double>(n) * std::log(theta) +
           static_cast<double>(m - n) * std::log1p(-theta);
}

}  // namespace detail

/// Removes each point inside `target_box` independently with probability theta.
inline DisturbanceOutcome bernoulli_disturb(const PointCloud& cloud, const OrientedBox& target_box,
                                            double theta, std::uint64_t seed) {
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("bernoulli: theta must lie in (0, 1)");
    DisturbanceOutcome out;
    out.cloud = cloud;
    out.range_offsets.assign(cloud.size(), 0.0);
    std::size_t m = 0, n = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.flags[i] == PointFlag::removed || !target_box.contains(cloud.points[i])) continue;
        ++m;
        if (rng::uniform(seed, cloud.frame_index, i, detail::kBernoulliStream) < theta) {
            out.cloud.flags[i] = PointFlag::removed;
            ++n;
        }
    }
    out.eligible = m;
    out.counts.removed = n;
    out.log_likelihood = m == 0 ? 0.0 : detail::bernoulli_log_likelihood(m, n, theta);
    return out;
}

/// Rain disturbance at `rate` (mm/h). A zero rate is the identity transform and is always accepted.
inline DisturbanceOutcome rain_disturb(const PointCloud& cloud, double rate, const RainParams& params,
                                       std::uint64_t seed) {
    DisturbanceOutcome out;
    out.cloud = cloud;
    out.range_offsets.assign(cloud.size(), 0.0);
    if (rate == 0.0) return out;
    if (std::find(params.rate_set.begin(), params.rate_set.end(), rate) == params.rate_set.end())
        throw ConfigError("rain: rate " + std::to_string(rate) + " is not in the configured rate set");

    const auto frame = static_cast<std::uint64_t>(cloud.frame_index);
    double ll = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.flags[i] == PointFlag::removed) continue;
        const double r = cloud.range(i);
        if (!(r > 1e-9)) continue;
        const auto t = detail::rain_terms(params, rate, r);
        PointFlag flag = PointFlag::original;
        double offset = 0.0;
        if (rng::uniform(seed, frame, i, detail::kScatterStream) < t.p_scat) {
            flag = PointFlag::reflected;
            offset = r * (0.05 + 0.95 * rng::uniform(seed, frame, i, detail::kReflectStream));
            out.cloud.points[i] = cloud.origin + (cloud.points[i] - cloud.origin) * (offset / r);
            ++out.counts.reflected;
        } else if (rng::uniform(seed, frame, i, detail::kLostStream) < t.p_lost) {
            flag = PointFlag::removed;
            ++out.counts.removed;
        } else if (t.sigma > 0.0) {
            flag = PointFlag::noised;
            offset = t.sigma * rng::normal(seed, frame, i, detail::kNoiseStream);
            out.cloud.points[i] = cloud.origin + (cloud.points[i] - cloud.origin) * ((r + offset) / r);
            ++out.counts.noised;
        }
        out.cloud.flags[i] = flag;
        out.range_offsets[i] = offset;
        ll += detail::rain_point_log_prob(flag, r, offset, t);
    }
    out.log_likelihood = ll;
    return out;
}

/// Applies `action` to `cloud`. Bernoulli actions act on points inside `target_box`.
inline DisturbanceOutcome apply_disturbance(const PointCloud& cloud, const DisturbanceAction& action,
                                            const OrientedBox& target_box, const RainParams& params) {
    if (const auto* b = std::get_if<BernoulliModel>(&action.model))
        return bernoulli_disturb(cloud, target_box, b->theta, action.seed);
    return rain_disturb(cloud, std::get<RainModel>(action.model).rate, params, action.seed);
}

/// Recomputes an outcome's log-likelihood from its flags and stored range offsets.
inline double disturbance_log_likelihood(const DisturbanceOutcome& outcome,
                                         const DisturbanceAction& action,
                                         const PointCloud& cloud_before,
                                         const RainParams& params = {}) {
    if (outcome.cloud.size() != cloud_before.size() ||
        outcome.range_offsets.size() != cloud_before.size())
        throw ContractViolation("disturbance audit: outcome and source cloud sizes differ");
    if (const auto* b = std::get_if<BernoulliModel>(&action.model)) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < cloud_before.size(); ++i)
            if (outcome.cloud.flags[i] == PointFlag::removed && cloud_before.flags[i] != PointFlag::removed)
                ++n;
        if (outcome.eligible == 0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
        if (n > outcome.eligible) return -std::numeric_limits<double>::infinity();
        return detail::bernoulli_log_likelihood(outcome.eligible, n, b->theta);
    }
    const double rate = std::get<RainModel>(action.model).rate;
    if (rate == 0.0) return 0.0;
    double ll = 0.0;
    for (std::size_t i = 0; i < cloud_before.size(); ++i) {
        if (cloud_before.flags[i] == PointFlag::removed) continue;
        const double r = cloud_before.range(i);
        if (!(r > 1e-9)) continue;
        ll += detail::rain_point_log_prob(outcome.cloud.flags[i], r, outcome.range_offsets[i],
                                          detail::rain_terms(params, rate, r));
    }
    return ll;
}

}  // namespace past
