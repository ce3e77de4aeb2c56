#include "qkdnet/event_queue.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qkdnet;

TEST(EventQueue, TimeOrder)
{
    EventQueue q;
    q.schedule(3.0, EventKind::KeyCharge, 3);
    q.schedule(1.0, EventKind::KeyCharge, 1);
    q.schedule(2.0, EventKind::KeyCharge, 2);
    EXPECT_EQ(q.size(), 3u);
    EXPECT_EQ(q.pop().a, 1u);
    EXPECT_EQ(q.now(), 1.0);
    EXPECT_EQ(q.pop().a, 2u);
    EXPECT_EQ(q.pop().a, 3u);
    EXPECT_TRUE(q.empty());
}

TEST(EventQueue, EqualTimesKeepScheduleOrder)
{
    EventQueue q;
    for (std::uint32_t n = 0; n < 100; ++n)
        q.schedule(5.0, n % 2 ? EventKind::PacketArrival : EventKind::RetryTimer, n);
    for (std::uint32_t n = 0; n < 100; ++n)
        EXPECT_EQ(q.pop().a, n);
}

TEST(EventQueue, RejectsPast)
{
    EventQueue q;
    q.schedule(2.0, EventKind::SimulationEnd);
    q.pop();
    EXPECT_THROW(q.schedule(1.0, EventKind::KeyCharge), std::logic_error);
    EXPECT_NO_THROW(q.schedule(2.0, EventKind::KeyCharge));
}

TEST(EventQueue, ClockNeverGoesBack)
{
    EventQueue q;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int n = 0; n < 200; ++n)
        q.schedule(u(rng), EventKind::PacketArrival);
    double last = 0.0;
    int popped = 0;
    while (!q.empty()) {
        const auto e = q.pop();
        ASSERT_GE(e.fireAt, last);
        last = e.fireAt;
        if (++popped < 300)
            q.schedule(q.now() + u(rng) / 10, EventKind::RetryTimer);
    }
}
