#include "qkdnet/simulator.hpp"

#include "detour.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <queue>

using namespace qkdnet;

namespace {

Topology pair()
{
    Topology t(100);
    t.addNode(0, {10, 10});
    t.addNode(1, {60, 10});
    t.addEdge(0, 1);
    return t;
}

Topology gabriel(std::size_t n, std::uint64_t seed)
{
    WaxmanConfig wc;
    wc.nodeCount = static_cast<int>(n);
    wc.seed = seed;
    wc.lambdaMax = 100;
    return generateWaxman(wc, true).topology;
}

// Key budget of a single link over the run: initial - reserve + charges.
double spendableBits(const SimulationConfig& c)
{
    const double charges = std::floor(c.duration / c.link.chargePeriod);
    return (c.link.initKeyMinBytes - c.link.minKeyBytes) * 8 + charges * c.link.chargeRateBps * c.link.chargePeriod;
}

} // namespace

TEST(Simulator, TwoNodesAmpleKeyDeliversEverything)
{
    SimulationConfig c;
    const double packets = c.duration * c.traffic.rateBps / (c.traffic.packetBytes * 8);
    const double needed = packets * KeyCostModel{}.cost(c.traffic.packetBytes);
    c.link.initKeyMinBytes = c.link.initKeyMaxBytes = (needed / 8 + c.link.minKeyBytes) * 1.1;
    ASSERT_GE(spendableBits(c), needed);
    c.rounds.stddevFraction = 0;   // steady rounds never push P_m above 1

    const RunStats s = runSimulation(c, pair());
    EXPECT_NEAR(static_cast<double>(s.sent), packets, 1.0);
    EXPECT_EQ(s.received, s.sent);
    EXPECT_DOUBLE_EQ(s.pdr, 1.0);
    EXPECT_DOUBLE_EQ(s.meanHops, 1.0);
    EXPECT_GE(s.meanDelay, s.minTransmissionDelay);
    EXPECT_TRUE(s.keyConservation);
}

// Jittered rounds close the link briefly; the only losses are stale packets.
TEST(Simulator, TwoNodesJitterCostsOnlyDelay)
{
    SimulationConfig c;
    c.link.initKeyMinBytes = c.link.initKeyMaxBytes = 30e6;
    const RunStats s = runSimulation(c, pair());
    EXPECT_GT(s.pdr, 0.95);
    EXPECT_EQ(s.received + s.dropDelay, s.sent);
}

TEST(Simulator, TwoNodesKeyLimitedMatchesBudget)
{
    SimulationConfig c;
    c.link.initKeyMinBytes = c.link.initKeyMaxBytes = 5e6;
    const RunStats s = runSimulation(c, pair());
    const double perPacket = static_cast<double>(KeyCostModel{}.cost(c.traffic.packetBytes));
    // signaling is Premium and also draws on the same storage
    const double expected = (spendableBits(c) - static_cast<double>(s.keyRoutingBits)) / perPacket;
    EXPECT_NEAR(static_cast<double>(s.received), expected, 2.0);
    EXPECT_LT(s.pdr, 0.5);
    EXPECT_TRUE(s.packetsBalance());
}

TEST(Simulator, NoKeyNoDelivery)
{
    SimulationConfig c;
    c.link.initKeyMinBytes = c.link.initKeyMaxBytes = 0;
    c.chargingEnabled = false;
    const RunStats s = runSimulation(c, pair());
    EXPECT_GT(s.sent, 0u);
    EXPECT_EQ(s.received, 0u);
    EXPECT_EQ(s.pdr, 0.0);
    EXPECT_TRUE(s.packetsBalance());
}

TEST(Simulator, Deterministic)
{
    SimulationConfig c;
    c.seed = 17;
    const Topology t = gabriel(20, 17);
    EXPECT_EQ(runSimulation(c, t), runSimulation(c, t));
    c.protocol = Protocol::Dv;
    EXPECT_EQ(runSimulation(c, t), runSimulation(c, t));
}

TEST(Simulator, SeedChangesOutcome)
{
    SimulationConfig a, b;
    a.seed = 1;
    b.seed = 2;
    const Topology t = gabriel(20, 5);
    EXPECT_NE(runSimulation(a, t).traceHash, runSimulation(b, t).traceHash);
}

TEST(Simulator, InvariantsOnRandomNetworks)
{
    for (Protocol p : {Protocol::Gpsrq, Protocol::Dv}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            SimulationConfig c;
            c.protocol = p;
            c.seed = seed;
            const Topology t = gabriel(30, seed);
            const RunStats s = runSimulation(c, t);
            EXPECT_TRUE(s.keyConservation);
            EXPECT_TRUE(s.packetsBalance());
            EXPECT_EQ(s.priorityViolations, 0u);
            EXPECT_EQ(s.causalityViolations, 0u);
            EXPECT_LE(s.received, s.sent);
            EXPECT_LE(s.maxForwardings, 4 * t.edgeCount());
            EXPECT_NEAR(s.pdr, static_cast<double>(s.received) / static_cast<double>(s.sent), 1e-15);
            if (s.received)
                EXPECT_GE(s.meanDelay, s.minTransmissionDelay * s.meanHops);
        }
    }
}

TEST(Simulator, RejectsBadInput)
{
    SimulationConfig c;
    c.beta = 1.5;
    EXPECT_THROW(Simulator(c, pair()), std::invalid_argument);

    Topology split(10);
    split.addNode(0, {0, 0});
    split.addNode(1, {1, 1});
    split.addNode(2, {5, 5});
    split.addEdge(0, 1);
    EXPECT_THROW(Simulator(SimulationConfig{}, split), std::invalid_argument);

    SimulationConfig d;
    d.disabledLinks = {Edge(0, 5)};
    EXPECT_THROW(Simulator(d, pair()), std::invalid_argument);
}

TEST(Simulator, InjectAfterRunRejected)
{
    Simulator sim(SimulationConfig{}, pair());
    sim.run();
    EXPECT_THROW(sim.injectPacket(0, 1, 1.0, TrafficClass::RealTime, 64), std::logic_error);
    EXPECT_THROW(sim.run(), std::logic_error);
}

// Every node signals L to every neighbor after each synchronized charge.
TEST(Overhead, GpsrqClosedForm)
{
    SimulationConfig c;
    c.traffic.rateBps = 0;
    const Topology t = gabriel(10, 4);
    const RunStats s = runSimulation(c, t);
    const std::uint64_t charges = 21;   // 7, 14, ..., 147 s
    const std::uint64_t messages = charges * 2 * t.edgeCount();
    EXPECT_EQ(s.overheadPackets, messages * (1 + c.handshakePackets));
    EXPECT_EQ(s.overheadBytes, messages * (8 + c.transportHeaderBytes + kHeaderOverheadBytes + c.handshakeBytes));
    EXPECT_GT(s.overheadPackets, 1000u);
    EXPECT_LT(s.overheadPackets, 10000u);
}

TEST(Overhead, QuietNetworkIsSilent)
{
    SimulationConfig c;
    c.traffic.rateBps = 0;
    c.chargingEnabled = false;
    const RunStats s = runSimulation(c, gabriel(10, 4));
    EXPECT_EQ(s.overheadPackets, 0u);
    EXPECT_EQ(s.overheadBytes, 0u);
}

TEST(Overhead, DvPeriodicFloor)
{
    SimulationConfig c;
    c.protocol = Protocol::Dv;
    c.traffic.rateBps = 0;
    c.chargingEnabled = false;
    const Topology t = gabriel(10, 4);
    const RunStats s = runSimulation(c, t);
    // ten periodic dumps per node, one copy per neighbor
    EXPECT_GE(s.overheadPackets, 10 * 2 * t.edgeCount());
}

TEST(Thresholds, EndpointsAgreeAfterQuietPeriod)
{
    SimulationConfig c;
    c.traffic.rateBps = 0;
    c.duration = 20;   // last charge at 14 s
    const Topology t = gabriel(15, 9);
    Simulator sim(c, t);
    sim.run();
    for (const Edge& e : t.edges()) {
        const auto tu = sim.gpsrq(e.u).threshold(e.v);
        const auto tv = sim.gpsrq(e.v).threshold(e.u);
        ASSERT_TRUE(tu && tv);
        EXPECT_EQ(*tu, *tv);
    }
}

TEST(Trace, RecordsOnlyAfterReturnsOrLoops)
{
    SimulationConfig c;
    c.recordTrace = true;
    c.seed = 3;
    Simulator sim(c, gabriel(30, 3));
    sim.run();
    std::map<PacketId, RouteAction> last;
    std::size_t records = 0;
    for (const TraceEntry& e : sim.trace()) {
        if (!e.newRecords.empty()) {
            records += e.newRecords.size();
            const auto it = last.find(e.packet);
            const bool returned = it != last.end() && it->second == RouteAction::Return;
            EXPECT_TRUE(e.loopDetected || returned);
        }
        if (e.action != RouteAction::Wait)
            last[e.packet] = e.action;
    }
    EXPECT_GT(records, 0u);
}

TEST(DetourScenario, PacketIsDiscardedAtSource)
{
    Simulator sim(detour::config(), detour::topology());
    sim.disableTraffic();
    sim.injectPacket(detour::a, detour::g, 1.0, TrafficClass::RealTime, 512);
    const RunStats s = sim.run();
    EXPECT_EQ(s.received, 0u);
    EXPECT_EQ(s.dropSource, 1u);
    const auto dump = sim.cacheDump(2.0);
    EXPECT_EQ(dump.size(), 6u);
    EXPECT_EQ(dump.front().rfind("CACHE 0 1 100.000000 50.000000", 0), 0u);
}

// With every link available, greedy plus right-hand recovery reaches any
// destination of a connected Gabriel graph.
TEST(Recovery, ReachesEveryPairOnSmallGabrielGraphs)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Topology t = gabriel(10, seed);
        for (NodeId src = 0; src < 10; ++src) {
            for (NodeId dst = 0; dst < 10; ++dst) {
                if (src == dst)
                    continue;
                SimulationConfig c;
                c.duration = 2.0;
                c.link.initKeyMinBytes = c.link.initKeyMaxBytes = 50e6;
                c.source = src;
                c.destination = dst;
                Simulator sim(c, t);
                sim.disableTraffic();
                sim.injectPacket(src, dst, 0.5, TrafficClass::RealTime, 512);
                const RunStats s = sim.run();
                EXPECT_EQ(s.received, 1u) << "seed " << seed << " " << src << "->" << dst;
                EXPECT_LE(s.maxForwardings, 4 * t.edgeCount());
            }
        }
    }
}
