#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "past/disturbance.hpp"

using namespace past;

namespace {

// Independent copy of the documented keyed generator (see rng.hpp header comment).
std::uint64_t fin(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
double ref_uniform(std::uint64_t seed, std::uint64_t frame, std::uint64_t index, std::uint64_t stream) {
    std::uint64_t h = fin(fin(seed) ^ fin(frame + 0x9E3779B97F4A7C15ULL));
    h = fin(h ^ fin(index + 0xD1B54A32D192ED03ULL));
    h = fin(h ^ fin(stream + 0xCA5A826395121157ULL));
    return std::ldexp(static_cast<double>(h >> 11) + 0.5, -53);
}

PointCloud box_cloud(const OrientedBox& box, int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    PointCloud c;
    c.origin = {0, 0, 1.8};
    for (int i = 0; i < n; ++i)
        c.push(box.to_world({u(gen) * box.extent.length, u(gen) * box.extent.width, u(gen) * box.extent.height}));
    return c;
}

PointCloud ranged_cloud(int n, double r_min, double r_max, std::uint64_t seed, int frame = 0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> ur(r_min, r_max), ua(-kPi, kPi);
    PointCloud c;
    c.frame_index = frame;
    for (int i = 0; i < n; ++i) {
        const double r = ur(gen), a = ua(gen);
        c.push({r * std::cos(a), r * std::sin(a), 0.0});
    }
    return c;
}

PointCloud fixed_range_cloud(int n, double r) {
    PointCloud c;
    for (int i = 0; i < n; ++i) {
        const double a = 2 * kPi * i / n;
        c.push({r * std::cos(a), r * std::sin(a), 0.0});
    }
    return c;
}

const OrientedBox kBox{{10, 0, 0.75}, 0.3, {}};

}  // namespace

TEST(Bernoulli, LogLikelihoodKnownValues) {
    EXPECT_NEAR(detail::bernoulli_log_likelihood(100, 15, 0.1), -43.4944, 1e-3);
    EXPECT_NEAR(detail::bernoulli_log_likelihood(100, 15, 0.1), 15 * std::log(0.1) + 85 * std::log(0.9), 1e-12);
    EXPECT_NEAR(detail::bernoulli_log_likelihood(50, 0, 0.1), -5.268, 1e-3);
}

TEST(Bernoulli, RemovalStreamMatchesReferenceGenerator) {
    auto cloud = box_cloud(kBox, 200, 1);
    cloud.frame_index = 4;
    const std::uint64_t seed = 0xABCDEF;
    const auto out = bernoulli_disturb(cloud, kBox, 0.1, seed);
    std::size_t n = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const bool expect_removed = ref_uniform(seed, 4, i, 8) < 0.1;
        EXPECT_EQ(out.cloud.flags[i] == PointFlag::removed, expect_removed) << i;
        n += expect_removed;
    }
    EXPECT_EQ(out.eligible, 200u);
    EXPECT_EQ(out.counts.removed, n);
    EXPECT_NEAR(out.log_likelihood, n * std::log(0.1) + (200 - n) * std::log(0.9), 1e-9);
}

TEST(Bernoulli, PointsOutsideBoxUntouchedAndEmptyBoxIsZero) {
    auto cloud = box_cloud(kBox, 50, 2);
    const OrientedBox far{{-30, 5, 0.75}, 0.0, {}};
    for (int i = 0; i < 20; ++i) cloud.push({-30 + 0.1 * i, 5, 0.5});
    const auto out = bernoulli_disturb(cloud, kBox, 0.5, 17);
    for (std::size_t i = 50; i < cloud.size(); ++i) EXPECT_EQ(out.cloud.flags[i], PointFlag::original);
    const OrientedBox empty{{100, 100, 0}, 0, {}};
    const auto none = bernoulli_disturb(cloud, empty, 0.1, 3);
    EXPECT_EQ(none.eligible, 0u);
    EXPECT_EQ(none.log_likelihood, 0.0);
    EXPECT_EQ(none.cloud, cloud);
    (void)far;
}

TEST(Bernoulli, RejectsThetaOutsideOpenInterval) {
    const auto cloud = box_cloud(kBox, 10, 1);
    EXPECT_THROW(bernoulli_disturb(cloud, kBox, 0.0, 1), ConfigError);
    EXPECT_THROW(bernoulli_disturb(cloud, kBox, 1.0, 1), ConfigError);
}

TEST(Bernoulli, EmpiricalRateWithinTolerance) {
    const OrientedBox big{{0, 0, 0}, 0, {1000, 1000, 1000}};
    PointCloud c;
    for (int i = 0; i < 100000; ++i) c.push({0.001 * i, 0, 0});
    const auto out = bernoulli_disturb(c, big, 0.1, 2024);
    const double rate = out.counts.removed / 1e5;
    EXPECT_GE(rate, 0.097);
    EXPECT_LE(rate, 0.103);
}

TEST(Rain, ClosedFormLossProbability) {
    const RainParams p;
    const auto t = detail::rain_terms(p, 40.0, 50.0);
    EXPECT_NEAR(t.p_lost, 1 - std::exp(-2 * (4e-4 * std::pow(40.0, 0.6)) * 50), 1e-15);
    EXPECT_NEAR(t.p_lost, 0.306, 1e-3);
}

TEST(Rain, CategoryFrequenciesMatchClosedForm) {
    RainParams p;
    p.rate_set = {40.0};
    const auto cloud = fixed_range_cloud(100000, 50.0);
    const auto out = rain_disturb(cloud, 40.0, p, 99);
    const auto t = detail::rain_terms(p, 40.0, 50.0);
    const double n = 1e5;
    EXPECT_NEAR(out.counts.reflected / n, t.p_scat, 0.005);
    EXPECT_NEAR(out.counts.removed / n, (1 - t.p_scat) * t.p_lost, 0.005);
    EXPECT_NEAR(out.counts.noised / n, (1 - t.p_scat) * (1 - t.p_lost), 0.005);
}

TEST(Rain, ZeroRateIsIdentity) {
    const auto cloud = ranged_cloud(500, 3, 40, 1);
    const auto out = rain_disturb(cloud, 0.0, RainParams{}, 5);
    EXPECT_EQ(out.cloud, cloud);
    EXPECT_EQ(out.counts.total(), 0u);
    EXPECT_EQ(out.log_likelihood, 0.0);
}

TEST(Rain, RateOutsideSetRejected) {
    const auto cloud = ranged_cloud(10, 3, 40, 1);
    EXPECT_THROW(rain_disturb(cloud, 7.0, RainParams{}, 5), ConfigError);
}

TEST(Rain, ParamsValidation) {
    RainParams p;
    p.rate_set.clear();
    EXPECT_THROW(p.validate(), ConfigError);
    p = RainParams{};
    p.noise_scale = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = RainParams{};
    p.rate_set = {5, -1};
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_NO_THROW(RainParams{}.validate());
}

TEST(Rain, DeterministicAndReflectionsStayOnRay) {
    const auto cloud = ranged_cloud(2000, 3, 40, 3, 2);
    const auto a = rain_disturb(cloud, 15.0, RainParams{}, 1234);
    const auto b = rain_disturb(cloud, 15.0, RainParams{}, 1234);
    EXPECT_EQ(a, b);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (a.cloud.flags[i] != PointFlag::reflected) continue;
        const double r0 = cloud.range(i), r1 = a.cloud.range(i);
        EXPECT_GE(r1, 0.05 * r0 - 1e-9);
        EXPECT_LE(r1, r0 + 1e-9);
        const Vec3 d0 = (cloud.points[i] - cloud.origin) * (1 / r0);
        const Vec3 d1 = (a.cloud.points[i] - a.cloud.origin) * (1 / r1);
        EXPECT_NEAR((d0 - d1).norm(), 0.0, 1e-9);
    }
}

TEST(Rain, CountsMatchFlags) {
    const auto cloud = ranged_cloud(3000, 3, 40, 4);
    const auto out = rain_disturb(cloud, 10.0, RainParams{}, 8);
    std::size_t changed = 0;
    for (auto f : out.cloud.flags) changed += f != PointFlag::original;
    EXPECT_EQ(out.counts.total(), changed);
}

TEST(Audit, ReproducesStoredLikelihoodOnRandomCases) {
    std::mt19937_64 gen(31);
    const RainParams params;
    for (int k = 0; k < 1000; ++k) {
        const auto seed = gen();
        if (k % 2 == 0) {
            const double theta = std::uniform_real_distribution<double>(0.01, 0.9)(gen);
            auto cloud = box_cloud(kBox, 20 + static_cast<int>(gen() % 200), gen());
            const DisturbanceAction action{BernoulliModel{theta}, seed};
            const auto out = apply_disturbance(cloud, action, kBox, params);
            ASSERT_NEAR(disturbance_log_likelihood(out, action, cloud, params), out.log_likelihood, 1e-9);
        } else {
            const double rate = params.rate_set[gen() % params.rate_set.size()];
            const auto cloud = ranged_cloud(50 + static_cast<int>(gen() % 300), 3, 40, gen(), static_cast<int>(gen() % 20));
            const DisturbanceAction action{RainModel{rate}, seed};
            const auto out = apply_disturbance(cloud, action, kBox, params);
            ASSERT_NEAR(disturbance_log_likelihood(out, action, cloud, params), out.log_likelihood,
                        1e-9 * std::max(1.0, std::abs(out.log_likelihood)));
        }
    }
}

TEST(Audit, TamperedRemovalDetected) {
    const auto cloud = box_cloud(kBox, 100, 5);
    const DisturbanceAction action{BernoulliModel{0.1}, 77};
    auto out = apply_disturbance(cloud, action, kBox, RainParams{});
    for (auto& f : out.cloud.flags)
        if (f != PointFlag::removed) {
            f = PointFlag::removed;
            break;
        }
    EXPECT_GT(std::abs(disturbance_log_likelihood(out, action, cloud) - out.log_likelihood), 1e-3);

    const auto rcloud = ranged_cloud(300, 3, 40, 6);
    const DisturbanceAction rain{RainModel{10.0}, 77};
    auto rout = apply_disturbance(rcloud, rain, kBox, RainParams{});
    for (auto& f : rout.cloud.flags)
        if (f == PointFlag::noised) {
            f = PointFlag::removed;
            break;
        }
    EXPECT_GT(std::abs(disturbance_log_likelihood(rout, rain, rcloud) - rout.log_likelihood), 1e-3);
}

TEST(Audit, UnmodifiedOutcomeScoresRetentionProbabilities) {
    const auto cloud = ranged_cloud(200, 3, 40, 7);
    DisturbanceOutcome out;
    out.cloud = cloud;
    out.range_offsets.assign(cloud.size(), 0.0);
    const RainParams p;
    double expected = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double a = 4e-4 * std::pow(5.0, 0.6), r = cloud.range(i);
        expected += -0.15 * a * r - 2 * a * r;  // log of exp(-..)·exp(-..)
    }
    const double got = disturbance_log_likelihood(out, DisturbanceAction{RainModel{5.0}, 1}, cloud, p);
    EXPECT_NEAR(got, expected, 1e-9);
    EXPECT_LT(got, 0.0);
}

TEST(Audit, SizeMismatchIsContractViolation) {
    const auto cloud = ranged_cloud(20, 3, 40, 1);
    const DisturbanceAction action{RainModel{5.0}, 1};
    auto out = apply_disturbance(cloud, action, kBox, RainParams{});
    out.cloud.push({1, 1, 1});
    EXPECT_THROW(disturbance_log_likelihood(out, action, cloud), ContractViolation);
}

TEST(Rain, ExpectedRemovalNondecreasingInRate) {
    RainParams p;
    p.rate_set = {5, 10, 15, 20, 30, 40};
    const auto cloud = ranged_cloud(400, 3, 40, 12);
    double previous = -1;
    for (double rate : p.rate_set) {
        double removed = 0;
        for (std::uint64_t s = 0; s < 100; ++s) removed += rain_disturb(cloud, rate, p, s).counts.removed;
        EXPECT_GE(removed, previous) << rate;
        previous = removed;
    }
}

TEST(Rain, LikelihoodMatchesHandComputedSumInBothDensityUnits) {
    const auto cloud = ranged_cloud(400, 3, 40, 21, 1);
    for (bool standardized : {true, false}) {
        RainParams p;
        p.standardized_density = standardized;
        const double rate = 10.0;
        const auto out = rain_disturb(cloud, rate, p, 77);
        const double a = 4e-4 * std::pow(rate, 0.6), sigma = 0.02 * std::sqrt(rate);
        double want = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double r = cloud.range(i);
            const double ps = 1 - std::exp(-0.15 * a * r), pl = 1 - std::exp(-2 * a * r);
            switch (out.cloud.flags[i]) {
                case PointFlag::reflected:
                    want += std::log(ps) + (standardized ? 0.0 : -std::log(0.95 * r));
                    break;
                case PointFlag::removed: want += std::log((1 - ps) * pl); break;
                default: {
                    const double z = out.range_offsets[i] / sigma;
                    const double dens = std::exp(-0.5 * z * z) / std::sqrt(2 * kPi) / (standardized ? 1.0 : sigma);
                    want += std::log((1 - ps) * (1 - pl) * dens);
                }
            }
        }
        EXPECT_NEAR(out.log_likelihood, want, 1e-7 * std::abs(want)) << standardized;
        if (standardized) EXPECT_LT(out.log_likelihood, 0.0);
        else EXPECT_GT(out.log_likelihood, 0.0);  // sigma ~ 0.06 m makes per-meter densities > 1
    }
}
