#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace qsplit;
using qsplit::test::chain;

TEST(Compensation, LinearAtThetaOne) { EXPECT_DOUBLE_EQ(compensation(2.0, 1.0), 2.0); }

TEST(Compensation, OneIsFixedPoint) {
    for (double theta : {1.0, 1.1, 1.7, 3.0}) EXPECT_DOUBLE_EQ(compensation(1.0, theta), 1.0);
}

TEST(Compensation, FractionalExponent) {
    EXPECT_NEAR(compensation(2.0, 1.1), std::exp(1.1 * std::log(2.0)), 1e-14);
    EXPECT_NEAR(compensation(2.0, 1.1), 2.1435, 5e-5);
}

TEST(Compensation, BelowOneRejected) { EXPECT_THROW(compensation(0.5, 1.1), ValidationError); }

TEST(Compensation, DerivativeMatchesDifference) {
    for (double r : {1.2, 2.0, 5.5}) {
        const double h = 1e-6;
        const double fd = (compensation(r + h, 1.3) - compensation(r - h, 1.3)) / (2 * h);
        EXPECT_NEAR(compensation_derivative(r, 1.3), fd, 1e-7);
    }
}

TEST(DeviceDelay, NothingOnDevice) {
    EXPECT_EQ(device_delay(chain({2e9, 3e9}, {1e5, 1e4}), 0, DeviceSpec{1e10}), 0.0);
}

TEST(DeviceDelay, PrefixOverSpeed) {
    const auto p = chain({2e9, 3e9}, {1e5, 1e4});
    DeviceSpec d;
    d.flops = 1e10;
    EXPECT_DOUBLE_EQ(device_delay(p, 2, d), 0.5);
    EXPECT_DOUBLE_EQ(device_delay(p, 1, d), 0.2);
}

TEST(ServerDelay, NothingOnEdge) {
    EXPECT_EQ(server_delay(chain({2e9, 3e9}, {1e5, 1e4}), 2, 3.0, ServerSpec{}), 0.0);
}

TEST(ServerDelay, LinearCompensation) {
    ServerSpec s;
    s.unit_flops = 5e9;
    s.theta = 1.0;
    EXPECT_DOUBLE_EQ(server_delay(chain({2e9, 3e9}, {1e5, 1e4}), 1, 2.0, s), 0.3);
}

TEST(ServerDelay, FractionalCompensation) {
    ServerSpec s;
    s.unit_flops = 5e9;
    s.theta = 1.1;
    const double expect = 3e9 / (std::exp(1.1 * std::log(2.0)) * 5e9);
    EXPECT_NEAR(server_delay(chain({2e9, 3e9}, {1e5, 1e4}), 1, 2.0, s), expect, 1e-15);
    EXPECT_NEAR(expect, 0.2799, 5e-5);
}

TEST(TransmissionDelays, BitsOverRate) {
    const auto p = chain({1e9, 1e9}, {1e6, 1e4}, 2e6, 5e5);
    const auto [up, down] = transmission_delays(p, 1, 1e6, 1e6);
    EXPECT_EQ(up, Delay::finite(1.0));
    EXPECT_EQ(down, Delay::finite(0.5));
}

TEST(TransmissionDelays, FullDeviceIgnoresRate) {
    const auto p = chain({1e9, 1e9}, {1e6, 1e4});
    const auto [up, down] = transmission_delays(p, 2, 0.0, 0.0);
    EXPECT_EQ(up, Delay::finite(0.0));
    EXPECT_EQ(down, Delay::finite(0.0));
}

TEST(TransmissionDelays, ZeroRateIsInfeasible) {
    const auto p = chain({1e9, 1e9}, {1e6, 1e4});
    const auto [up, down] = transmission_delays(p, 0, 0.0, 1e6);
    EXPECT_TRUE(up.infeasible);
    EXPECT_FALSE(down.infeasible);
    EXPECT_GT(up, Delay::finite(1e300));
    EXPECT_TRUE(total_delay(Delay::finite(0.1), Delay::finite(0.1), up, down).infeasible);
}

TEST(TotalDelay, Additive) {
    const auto t = total_delay(Delay::finite(0.1), Delay::finite(0.2), Delay::finite(0.3), Delay::finite(0.4));
    EXPECT_FALSE(t.infeasible);
    EXPECT_NEAR(t.seconds, 1.0, 1e-15);
}

TEST(TotalDelay, PinnedUserIsDeviceDelayOnly) {
    auto sc = test::make_scenario(1, 1, 1, chain({1e9, 2e9}, {1e5, 1e4}));
    sc.topology.sic_threshold_up = 1.0;  // unreachable
    const auto splits = shared_splits(sc, 0);
    ASSERT_EQ(splits[0], 2u);
    const auto v = utility(sc, splits, cold_init(sc));
    EXPECT_DOUBLE_EQ(v.breakdowns[0].t_total, 3e9 / sc.devices[0].flops);
    EXPECT_EQ(v.breakdowns[0].t_up, 0.0);
    EXPECT_EQ(v.breakdowns[0].t_server, 0.0);
}

TEST(TotalDelay, RandomInstanceMatchesScalarRecomputation) {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto sc = test::make_scenario(2, 4, 3, synth_profile(seed, 4));
        sc.channel = sample_channels(sc.topology, Placement{}, seed);
        const auto x = random_interior(sc, rng);
        SplitVector splits{0, 2, 4, 1};
        const auto v = utility(sc, splits, x);
        const auto ref = test::scalar_objective(sc, splits, x);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_NEAR(v.breakdowns[i].t_total, ref[i].t, 1e-12 * ref[i].t);
            EXPECT_NEAR(v.breakdowns[i].e_total, ref[i].e, 1e-12 * ref[i].e);
        }
    }
}

TEST(Energy, NoDeviceEnergyWhenOffloadingAll) {
    auto sc = test::make_scenario(1, 1, 1, chain({1e9, 2e9}, {1e5, 1e4}));
    const auto v = utility(sc, {0}, cold_init(sc));
    EXPECT_EQ(v.breakdowns[0].e_device, 0.0);
}

TEST(Energy, UplinkIsPowerTimesTime) {
    auto sc = test::make_scenario(1, 1, 1, chain({1e9, 2e9}, {1e5, 1e4}));
    auto x = cold_init(sc);
    x.p[0] = 0.1;
    const auto v = utility(sc, {1}, x);
    EXPECT_NEAR(v.breakdowns[0].e_up, 0.1 * v.breakdowns[0].t_up, 1e-18);
    // rate tuned so the upload takes exactly one second
    const double rate = 1e6 * std::log2(1.0 + 0.1 * 1e-9 / 1e-10);
    sc.profile.layers[0].out_bits = rate;
    const auto w = utility(sc, {1}, x);
    EXPECT_NEAR(w.breakdowns[0].t_up, 1.0, 1e-12);
    EXPECT_NEAR(w.breakdowns[0].e_up, 0.1, 1e-13);
}

TEST(Energy, ComputeEnergyFormulas) {
    DeviceSpec d;
    d.kappa = 2e-31;
    d.flops = 1e9;
    d.cycles_per_bit = 1e4;
    EXPECT_DOUBLE_EQ(device_compute_energy(d, 3e9), 2e-31 * 1e18 * 1e4 * 3e9);
    ServerSpec s;
    s.kappa = 1e-34;
    s.unit_flops = 5e9;
    s.cycles_per_bit = 1e4;
    EXPECT_NEAR(server_compute_energy(s, 2.0, 4e9), 1e-34 * 1e20 * 1e4 * 4e9, 1e-15);
}

TEST(SoftIndicator, MatchesLogisticClosedForm) {
    const QoESpec q{0.010, 2000.0};
    EXPECT_NEAR(soft_indicator(0.01002, q), 1.0 / (1.0 + std::exp(-4.0)), 1e-12);
}

TEST(SoftIndicator, MidpointAtDeadline) { EXPECT_EQ(soft_indicator(0.25, QoESpec{0.25, 2000.0}), 0.5); }

TEST(SoftIndicator, Saturates) {
    EXPECT_LT(soft_indicator(0.001, QoESpec{0.01, 2000.0}), 1e-300);
    EXPECT_EQ(soft_indicator(1.0, QoESpec{0.01, 2000.0}), 1.0);
    EXPECT_TRUE(std::isfinite(soft_indicator(1e6, QoESpec{0.01, 2000.0})));
    EXPECT_TRUE(std::isfinite(soft_indicator(-1e6, QoESpec{0.01, 2000.0})));
}

TEST(SoftIndicator, MonotoneWithMatchingDerivative) {
    const QoESpec q{0.2, 50.0};
    double prev = -1.0;
    for (double t = 0.05; t < 0.4; t += 0.005) {
        const double r = soft_indicator(t, q);
        EXPECT_GE(r, prev);
        prev = r;
        const long double h = 1e-7L;
        const long double fd = (soft_indicator<long double>(t + h, q) - soft_indicator<long double>(t - h, q)) / (2 * h);
        EXPECT_NEAR(soft_indicator_derivative(t, q), static_cast<double>(fd), 1e-6 * std::max(1.0, std::abs(static_cast<double>(fd))));
    }
}

TEST(Dct, HardBranches) {
    EXPECT_EQ(dct(9.0, QoESpec{10.0, 1.0}), 0.0);
    EXPECT_EQ(dct(12.0, QoESpec{10.0, 1.0}), 2.0);
}

TEST(Dct, SoftApproachesHardAsSteepnessGrows) {
    for (double t : {0.08, 0.095, 0.105, 0.12}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double a : {10.0, 100.0, 1000.0, 10000.0}) {
            const QoESpec q{0.1, a};
            const double gap = std::abs(dct_soft(t, q) - dct(t, q));
            EXPECT_LE(gap, prev + 1e-15);
            prev = gap;
        }
        EXPECT_LT(prev, 1e-6);
    }
}

TEST(Aggregate, FigureTwoRedBars) {
    const std::vector<double> t{11, 5, 7, 20};
    const std::vector<QoESpec> q{{9.25, 1}, {19, 1}, {4.25, 1}, {15.5, 1}};
    const auto h = aggregate_qoe_hard(t, q);
    EXPECT_DOUBLE_EQ(h.dct_sum, 9.0);
    EXPECT_EQ(h.count, 3.0);
}

TEST(Aggregate, FigureTwoBlueBarsAllOnTime) {
    const std::vector<double> t{9, 18, 4, 15};
    const std::vector<QoESpec> q{{9.25, 1}, {19, 1}, {4.25, 1}, {15.5, 1}};
    EXPECT_EQ(aggregate_qoe_hard(t, q).count, 0.0);
}

TEST(Aggregate, AllEarlySaturatesToZero) {
    const std::vector<double> t{0.01, 0.02, 0.03};
    const std::vector<QoESpec> q(3, QoESpec{0.1, 2000.0});
    const auto s = aggregate_qoe(t, q);
    EXPECT_NEAR(s.dct_sum, 0.0, 1e-100);
    EXPECT_NEAR(s.count, 0.0, 1e-100);
}

TEST(Aggregate, MixedInstanceMatchesLoop) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.3);
    std::vector<double> t(20);
    std::vector<QoESpec> q(20);
    for (std::size_t i = 0; i < 20; ++i) {
        t[i] = u(rng);
        q[i] = {u(rng), 40.0 + 10.0 * static_cast<double>(i)};
    }
    double c = 0.0, z = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        const double r = 1.0 / (1.0 + std::exp(-q[i].a * (t[i] / q[i].q - 1.0)));
        c += (t[i] - q[i].q) * r;
        z += r;
    }
    const auto s = aggregate_qoe(t, q);
    EXPECT_NEAR(s.dct_sum, c, 1e-12);
    EXPECT_NEAR(s.count, z, 1e-12);
}

TEST(Aggregate, SizeMismatchThrows) {
    const std::vector<double> t{1.0};
    const std::vector<QoESpec> q(2);
    EXPECT_THROW(aggregate_qoe(t, q), ValidationError);
}

TEST(Validation, Specs) {
    DeviceSpec d;
    d.p_min = 1.0;
    d.p_max = 0.5;
    EXPECT_THROW(validate(d), ValidationError);
    ServerSpec s;
    s.r_min = 0.5;
    EXPECT_THROW(validate(s), ValidationError);
    EXPECT_THROW(validate(QoESpec{0.0, 10.0}), ValidationError);
}
