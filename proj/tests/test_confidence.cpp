// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/confidence.hpp>

#include <random>

#include <gtest/gtest.h>

namespace gsdanchor {
namespace {

constexpr double kLref = 5.045;

TEST(Confidence, HealthyScene)
{
    const auto r = compose_confidence(sufficiency_score(30), concentration_score(0.1), 0.8, anomaly_score(50, kLref),
                                      50, kLref);
    EXPECT_DOUBLE_EQ(r.s_sufficiency, 1.0);
    EXPECT_NEAR(r.s_concentration, 0.8, 1e-15);
    EXPECT_DOUBLE_EQ(r.s_anomaly, 1.0);
    EXPECT_NEAR(r.c_raw, 0.89, 1e-12);
    EXPECT_FALSE(r.guard_triggered);
    EXPECT_EQ(r.c_final, r.c_raw);
    EXPECT_NEAR(r.p_thresh, 16.8166667, 1e-6);
}

TEST(Confidence, GuardClampsBelowThreshold)
{
    const auto r = compose_confidence(1.0, 0.8, 0.8, 1.0, 16, kLref);
    EXPECT_TRUE(r.guard_triggered);
    EXPECT_DOUBLE_EQ(r.c_final, 0.3);
    EXPECT_NEAR(r.c_raw, 0.89, 1e-12);
}

TEST(Confidence, SingleWeakDetection)
{
    ArrayX<double> lengths(1), confs(1);
    lengths << 40.0;
    confs << 0.1;
    const auto r = score_confidence(lengths, confs, 40.0, kLref);
    EXPECT_DOUBLE_EQ(r.s_sufficiency, 0.05);
    EXPECT_DOUBLE_EQ(r.s_concentration, 1.0);
    EXPECT_DOUBLE_EQ(r.s_quality, 0.1);
    EXPECT_DOUBLE_EQ(r.s_anomaly, 1.0);
    EXPECT_NEAR(r.c_raw, 0.4875, 1e-12);
}

TEST(Confidence, SubScoreFormulas)
{
    ArrayX<double> lengths(4);
    lengths << 10, 12, 14, 16;
    // mean 13, sd sqrt(20/3)
    EXPECT_NEAR(coefficient_of_variation(lengths), std::sqrt(20.0 / 3.0) / 13.0, 1e-15);
    EXPECT_EQ(concentration_score(0.6), 0.0);
    EXPECT_EQ(sufficiency_score(0), 0.0);
    EXPECT_EQ(sufficiency_score(40), 1.0);
    ArrayX<double> confs(4);
    confs << 0.2, 0.9, 0.4, 0.6;
    EXPECT_DOUBLE_EQ(quality_score(confs), 0.5);
    EXPECT_EQ(anomaly_score(5.045 / 1.5, kLref), 0.0);
    EXPECT_EQ(anomaly_score(5.045 / 0.005, kLref), 0.0);
    EXPECT_EQ(anomaly_score(5.045, kLref), 1.0);
}

TEST(Confidence, ZeroReport)
{
    const auto r = zero_confidence(kLref);
    EXPECT_EQ(r.c_final, 0.0);
    EXPECT_EQ(r.c_raw, 0.0);
    EXPECT_NEAR(r.p_thresh, kLref / 0.3, 1e-12);
}

TEST(ConfidenceProperties, WeightedSumAndGuardOnRandomInputs)
{
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.0, 1.0), p(1.0, 200.0), l(1.0, 10.0), g(0.05, 1.0);
    for (int t = 0; t < 2000; ++t) {
        const double s1 = u(rng), s2 = u(rng), s3 = u(rng), s4 = u(rng) < 0.5 ? 0.0 : 1.0;
        const double p_mode = p(rng), l_ref = l(rng);
        ConfidenceConfig cfg;
        cfg.gsd_max = g(rng);
        const auto r = compose_confidence(s1, s2, s3, s4, p_mode, l_ref, cfg);
        EXPECT_EQ(r.c_raw, 0.35 * s1 + 0.35 * s2 + 0.20 * s3 + 0.10 * s4);
        EXPECT_GE(r.c_raw, 0.0);
        EXPECT_LE(r.c_raw, 1.0);
        EXPECT_LE(r.c_final, r.c_raw);
        EXPECT_EQ(r.guard_triggered, p_mode < l_ref / cfg.gsd_max);
        EXPECT_EQ(r.guard_triggered, resolution_guard(p_mode, l_ref, cfg.gsd_max));
        if (r.guard_triggered) {
            EXPECT_EQ(r.c_final, std::min(r.c_raw, 0.3));
        } else {
            EXPECT_EQ(r.c_final, r.c_raw);
        }
        EXPECT_DOUBLE_EQ(guard_threshold(2 * l_ref, cfg.gsd_max), 2 * guard_threshold(l_ref, cfg.gsd_max));
    }
}

TEST(ConfidenceProperties, SufficiencyMonotone)
{
    for (std::size_t n = 0; n < 50; ++n) EXPECT_LE(sufficiency_score(n), sufficiency_score(n + 1));
}

TEST(ConfidenceProperties, SubScoresInUnitInterval)
{
    std::mt19937_64 rng(59);
    std::lognormal_distribution<double> d(3.5, 0.8);
    std::uniform_real_distribution<double> c(0.0, 1.0);
    for (int t = 0; t < 300; ++t) {
        const Eigen::Index n = 1 + t % 40;
        ArrayX<double> lengths(n), confs(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            lengths(i) = d(rng);
            confs(i) = c(rng);
        }
        const auto r = score_confidence(lengths, confs, lengths.mean(), kLref);
        for (double s : {r.s_sufficiency, r.s_concentration, r.s_quality, r.s_anomaly, r.c_raw, r.c_final}) {
            EXPECT_GE(s, 0.0);
            EXPECT_LE(s, 1.0);
        }
    }
}

} // namespace
} // namespace gsdanchor
