#include <gtest/gtest.h>

#include <cmath>

#include "gravmatch/insmodel.hpp"

using namespace gravmatch;

TEST(Rng, ReproducibleStream) {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.gaussian(), b.gaussian());
    Rng c(8);
    EXPECT_NE(Rng(7).uniform(), c.uniform());
}

TEST(Rng, UniformRangeAndGaussianMoments) {
    Rng r(1);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
        const double g = r.gaussian();
        sum += g;
        sq += g * g;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.015);
}

TEST(Truth, StepLengthFollowsSpeed) {
    const std::vector<LonLat> wps{{0.0, 0.0}, {1.0, 0.0}};
    const auto truth = simulate_truth(wps, 7.54, 12.0);
    const double step = 7.54 * 12.0 / 3600.0;
    EXPECT_NEAR(step, 0.025133, 1e-6);
    ASSERT_EQ(truth.size(), static_cast<std::size_t>(std::floor(1.0 / step)) + 1);
    for (std::size_t i = 1; i < truth.size(); ++i) {
        EXPECT_NEAR(truth[i].position.lon - truth[i - 1].position.lon, step, 1e-12);
        EXPECT_NEAR(displacement(truth[i - 1].velocity, 12.0).lon, step, 1e-12);
    }
    EXPECT_EQ(truth.front().position, (LonLat{0.0, 0.0}));
}

TEST(Truth, WaypointsAreVisited) {
    const std::vector<LonLat> wps{{0.0, 0.0}, {0.1, 0.0}, {0.1, 0.1}};
    const auto truth = simulate_truth(wps, 3.6, 12.0);  // 0.012 deg per step
    bool hit = false;
    for (std::size_t i = 0; i + 1 < truth.size(); ++i) {
        const LonLat next = truth[i].position + displacement(truth[i].velocity, 12.0);
        EXPECT_NEAR(distance_deg(next, truth[i + 1].position), 0.0, 1e-12);
        if (truth[i].position == wps[1]) hit = true;
    }
    EXPECT_TRUE(hit);
    for (const auto& s : truth) EXPECT_LE(s.position.lat, 0.1 + 1e-12);
}

TEST(Truth, RejectsBadInput) {
    const std::vector<LonLat> one{{0.0, 0.0}};
    EXPECT_THROW(simulate_truth(one, 1.0, 12.0), InvalidArgument);
    const std::vector<LonLat> two{{0.0, 0.0}, {1.0, 0.0}};
    EXPECT_THROW(simulate_truth(two, 0.0, 12.0), InvalidArgument);
    EXPECT_THROW(simulate_truth(two, 1.0, -1.0), InvalidArgument);
    const std::vector<LonLat> same{{0.0, 0.0}, {0.0, 0.0}};
    EXPECT_THROW(simulate_truth(same, 1.0, 12.0), InvalidArgument);
}

TEST(Sensors, NoiseFreeVelocityIsTruthPlusBias) {
    const TruthState st{{0.0, 0.0}, {3.0, 4.0}};
    SensorConfig cfg{{1.0, -0.5}, 0.0, 0.0, 12.0, 3};
    Rng rng(3);
    const Velocity v = measure_velocity(st, cfg, rng);
    EXPECT_DOUBLE_EQ(v.lon, 4.0);
    EXPECT_DOUBLE_EQ(v.lat, 3.5);
}

TEST(Sensors, VelocityNoiseScale) {
    const TruthState st{{0.0, 0.0}, {0.0, 0.0}};
    SensorConfig cfg{{0.0, 0.0}, 9e-6, 0.0, 12.0, 0};
    Rng rng(5);
    double sq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) sq += std::pow(measure_velocity(st, cfg, rng).lon, 2);
    EXPECT_NEAR(std::sqrt(sq / n), 9e-6 * 3600.0, 9e-6 * 3600.0 * 0.02);
}

TEST(Sensors, GravityMeasurement) {
    const GravityMap m(0.0, 0.0, 1.0, 1.0, 2, 2, {1.0, 2.0, 3.0, 4.0});
    Rng rng(1);
    EXPECT_EQ(measure_gravity(m, {0.9, 0.2}, 0.0, rng), 2.0);
    EXPECT_THROW(measure_gravity(m, {5.0, 0.0}, 0.0, rng), OutOfBounds);
    SensorConfig bad{{0, 0}, -1.0, 0.0, 12.0, 0};
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(DeadReckon, AccumulatesDisplacements) {
    const std::vector<Velocity> v{{3.6, 0.0}, {0.0, 3.6}, {-3.6, 0.0}};
    const auto p = dead_reckon({1.0, 1.0}, v, 10.0);
    ASSERT_EQ(p.size(), 3u);
    EXPECT_NEAR(p[0].lon, 1.01, 1e-15);
    EXPECT_NEAR(p[1].lat, 1.01, 1e-15);
    EXPECT_NEAR(p[2].lon, 1.0, 1e-15);
    EXPECT_THROW(dead_reckon({0, 0}, std::span<const Velocity>{}, 1.0), InvalidArgument);
}

TEST(DeadReckon, BiasDriftIsLinear) {
    // 1 deg/h bias over one hour of flight drifts 1 deg.
    std::vector<Velocity> v(300, Velocity{1.0, 0.0});
    const auto p = dead_reckon({0.0, 0.0}, v, 12.0);
    EXPECT_NEAR(p.back().lon, 1.0, 1e-12);
}

TEST(Buffers, PushClearValidate) {
    SegmentBuffers b;
    b.push(1.0, {0, 0}, {0, 0});
    b.push(2.0, {0, 0}, {0, 0});
    EXPECT_EQ(b.size(), 2u);
    EXPECT_NO_THROW(b.validate());
    b.V.pop_back();
    EXPECT_THROW(b.validate(), LengthMismatch);
    b.clear();
    EXPECT_EQ(b.size(), 0u);
}

TEST(NavLog, AdvanceUsesPreviousVelocity) {
    NavLog log({0.0, 0.0});
    log.advance({0.0, 0.0}, {3.6, 0.0}, 1.0, 10.0);
    EXPECT_EQ(log.records[0].ins, (LonLat{0.0, 0.0}));
    log.advance({0.01, 0.0}, {0.0, 3.6}, 1.0, 10.0);
    EXPECT_NEAR(log.records[1].ins.lon, 0.01, 1e-15);
    EXPECT_NEAR(log.next_ins(10.0).lat, 0.01, 1e-15);
}

TEST(NavLog, CorrectionReanchors) {
    NavLog log({0.0, 0.0});
    for (int i = 0; i < 4; ++i) log.advance({0.0, 0.0}, {3.6, 0.0}, 0.0, 10.0);
    const std::vector<LonLat> fix{{5.0, 5.0}, {6.0, 6.0}};
    apply_correction(log, fix);
    EXPECT_FALSE(log.records[1].corrected);
    EXPECT_TRUE(log.records[2].corrected);
    EXPECT_EQ(log.records[3].estimate, (LonLat{6.0, 6.0}));
    EXPECT_NE(log.records[3].ins, (LonLat{6.0, 6.0}));
    EXPECT_EQ(log.anchor, (LonLat{6.0, 6.0}));
    log.advance({0.0, 0.0}, {0.0, 0.0}, 0.0, 10.0);
    EXPECT_NEAR(log.records.back().ins.lon, 6.01, 1e-12);

    const std::vector<LonLat> too_long(6, LonLat{});
    EXPECT_THROW(apply_correction(log, too_long), LengthMismatch);
    EXPECT_THROW(apply_correction(log, std::span<const LonLat>{}), LengthMismatch);
}
