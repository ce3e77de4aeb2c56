#include "qkdnet/link_metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace qkdnet;

namespace {

// Values frozen from an arbitrary-precision evaluation of the formulas.
constexpr double kQ50 = 0.947892247540186449676837852208;    // q_m(50, 50, 100)
constexpr double kQ80 = 0.878346426448347016663456235485;    // q_m(80, 40, 100)

void expectRel(double got, double want)
{
    EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, std::abs(want)));
}

} // namespace

TEST(LocalMean, Examples)
{
    const std::vector<double> adjacent{60, 30, 20};
    expectRel(localMeanKey(adjacent), 110.0 / 3.0);
    EXPECT_EQ(localMeanKey(std::vector<double>{42}), 42.0);
    EXPECT_EQ(localMeanKey(std::vector<double>{25, 25}), 25.0);
    EXPECT_THROW(localMeanKey({}), std::invalid_argument);
}

TEST(Threshold, Examples)
{
    const std::vector<double> nearB{60, 30, 20};
    const std::vector<double> nearC{20, 30};
    const double lb = localMeanKey(nearB);
    const double lc = localMeanKey(nearC);
    EXPECT_EQ(lc, 25.0);
    EXPECT_EQ(linkThreshold(lb, lc), 25.0);
    EXPECT_EQ(linkThreshold(lc, lb), 25.0);
    EXPECT_EQ(linkThreshold(7, 7), 7.0);
    EXPECT_EQ(linkThreshold(0, 7), 0.0);
}

TEST(QuantumMetric, Examples)
{
    auto empty = quantumMetric(0, 50, 100);
    EXPECT_EQ(empty.fraction, 0.0);
    EXPECT_EQ(empty.value, 1.0);

    auto full = quantumMetric(100, 100, 100);
    EXPECT_EQ(full.fraction, 1.0);
    EXPECT_EQ(full.value, 0.0);

    auto half = quantumMetric(50, 50, 100);
    expectRel(half.fraction, 0.125);
    expectRel(half.value, kQ50);
    expectRel(quantumMetric(80, 40, 100).value, kQ80);
}

TEST(QuantumMetric, DecreasesWithMoreKey)
{
    double prev = 2.0;
    for (double cur = 0; cur <= 100; cur += 5) {
        const double v = quantumMetric(cur, 60, 100).value;
        EXPECT_LE(v, prev);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        prev = v;
    }
}

TEST(PublicMetric, Examples)
{
    PublicChannelStats st(5, 7.0);
    st.recordKeyRound(5.0, 100.0);
    EXPECT_DOUBLE_EQ(publicMetric(st, 100.0), 0.5);
    EXPECT_DOUBLE_EQ(publicMetric(st, 105.0), 1.0);
    EXPECT_GT(publicMetric(st, 106.0), 1.0);

    PublicChannelStats edge(2, 7.0);
    edge.recordKeyRound(2.0, 0.0);
    edge.recordKeyRound(6.0, 10.0);   // average 4, maximal 8
    EXPECT_DOUBLE_EQ(publicMetric(edge, 10.0), 0.75);
    EXPECT_DOUBLE_EQ(publicMetric(edge, 12.0), 1.0);
}

TEST(LinkMetric, Examples)
{
    EXPECT_DOUBLE_EQ(linkMetric(0.4, 0.2, 0.5), 0.3);
    EXPECT_EQ(linkMetric(0.4, 0.2, 1.0), 0.4);
    EXPECT_EQ(linkMetric(0.4, 0.2, 0.0), 0.2);
}

TEST(MeasureLink, CombinesParts)
{
    KeyStorage s(1, 80, 100, 1, 1);
    PublicChannelStats st(5, 7.0);
    st.recordKeyRound(7.0, 0.0);
    auto m = measureLink(s, 40, st, 0.5, 0.0);
    expectRel(m.qM, kQ80);
    EXPECT_DOUBLE_EQ(m.pM, 0.5);
    expectRel(m.rM, 0.5 * kQ80 + 0.25);
}
