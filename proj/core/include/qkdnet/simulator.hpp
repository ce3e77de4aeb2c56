#pragma once

#include "qkdnet/dv_routing.hpp"
#include "qkdnet/event_queue.hpp"
#include "qkdnet/gpsrq.hpp"
#include "qkdnet/key_storage.hpp"
#include "qkdnet/packet.hpp"
#include "qkdnet/qos.hpp"
#include "qkdnet/random.hpp"
#include "qkdnet/topology.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace qkdnet {

enum class Protocol : std::uint8_t { Gpsrq, Dv };

const char* toString(Protocol p) noexcept;
Protocol parseProtocol(const std::string& s);

/// Key storage defaults applied to every link. Sizes in bytes, 1 MB = 1e6 bytes.
struct LinkDefaults {
    double minKeyBytes = 1e6;
    double maxKeyBytes = 100e6;
    double initKeyMinBytes = 0.5e6;
    double initKeyMaxBytes = 25e6;
    double chargeRateBps = 100e3;
    double chargePeriod = 7.0;
    double bandwidthBps = 10e6;
};

struct TrafficConfig {
    double rateBps = 1e6;
    std::size_t packetBytes = 512;
    TrafficClass cls = TrafficClass::RealTime;
    Cipher cipher = Cipher::Otp;
    double startTime = 0.0;
};

enum class DvMode : std::uint8_t { Triggered, DeadInterval };

struct DvConfig {
    DvMode mode = DvMode::Triggered;
    double period = 15.0;
    double mergeWindow = 1.0;
    double helloInterval = 10.0;
    double deadInterval = 40.0;
};

struct SimulationConfig {
    Protocol protocol = Protocol::Gpsrq;
    std::uint64_t seed = 1;
    double duration = 150.0;

    double beta = 0.6;
    double alpha = 0.5;
    std::size_t tAverageWindow = 5;
    bool cacheEnabled = true;

    TrafficConfig traffic;
    LinkDefaults link;
    RoundDurationModel rounds;   // mean is taken from link.chargePeriod
    bool chargingEnabled = true;
    KeyCostModel controlCost;    // signaling and DV updates

    std::size_t queueCapacity = 1000;
    double propagationDelay = 1e-3;
    double maxDelayRealTime = 0.5;
    double maxDelayBestEffort = 5.0;
    double retryInterval = 0.1;

    // Modeled reliable transport for threshold exchanges.
    std::size_t handshakePackets = 3;
    std::size_t handshakeBytes = 120;
    std::size_t transportHeaderBytes = 40;   // IP + TCP on the payload segment
    std::size_t datagramHeaderBytes = 28;    // IP + UDP for DV updates
    std::size_t dvEntryBytes = 12;

    DvConfig dv;

    std::optional<NodeId> source;        // defaults to the first node
    std::optional<NodeId> destination;   // defaults to the last node
    std::vector<Edge> disabledLinks;     // public channel down for the whole run
    bool recordTrace = false;

    /// Throws std::invalid_argument on the first bad value.
    void validate() const;
    double maxDelayFor(TrafficClass c) const;
};

struct RunStats {
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    double pdr = 0.0;
    double meanDelay = 0.0;
    double meanHops = 0.0;
    std::uint64_t overheadPackets = 0;
    std::uint64_t overheadBytes = 0;
    Bits keyDataBits = 0;
    Bits keyRoutingBits = 0;
    std::uint64_t dropQueue = 0;
    std::uint64_t dropDelay = 0;
    std::uint64_t dropSource = 0;
    std::uint64_t dropLink = 0;
    std::uint64_t inFlight = 0;

    std::uint64_t returnedPackets = 0;   // data packets that ever carried loop=1
    std::uint64_t loop2Packets = 0;      // data packets that ever carried loop=2
    std::uint64_t cacheRecords = 0;
    std::uint64_t delayReturns = 0;
    std::uint64_t deadEndReturns = 0;
    std::uint64_t loopDetections = 0;
    std::uint64_t recoveryEntries = 0;
    std::uint64_t hopLimitDrops = 0;     // included in dropDelay
    std::uint32_t maxForwardings = 0;
    std::uint64_t controlDrops = 0;
    std::uint64_t events = 0;
    double minTransmissionDelay = 0.0;   // data packet bits / bandwidth

    // Invariant checks, evaluated during and after the run.
    bool keyConservation = true;
    std::uint64_t priorityViolations = 0;
    std::uint64_t causalityViolations = 0;

    std::uint64_t traceHash = 0;

    std::uint64_t drops() const { return dropQueue + dropDelay + dropSource + dropLink; }
    bool packetsBalance() const { return received + drops() + inFlight == sent; }

    friend bool operator==(const RunStats&, const RunStats&) = default;
};

/// One routing decision, kept when SimulationConfig::recordTrace is set.
struct TraceEntry {
    double time = 0.0;
    NodeId node = 0;
    PacketId packet = 0;
    std::optional<NodeId> from;
    RouteAction action = RouteAction::Wait;
    ForwardMode mode = ForwardMode::Greedy;
    NodeId nextHop = 0;
    GpsrqFields fields;           // as transmitted
    std::vector<CacheRecord> newRecords;
    bool loopDetected = false;
    bool delayReturn = false;
};

class Simulator {
public:
    /// Throws std::invalid_argument on bad config or a disconnected topology.
    Simulator(SimulationConfig cfg, Topology topology);

    /// Runs until cfg.duration and returns the statistics.
    RunStats run();

    /// Queue one data packet at `src`, independent of the CBR flow.
    PacketId injectPacket(NodeId src, NodeId dst, double at, TrafficClass cls, std::size_t payloadBytes);
    /// Turns off the built-in CBR source (useful for scripted scenarios).
    void disableTraffic() { m_trafficEnabled = false; }

    const std::vector<TraceEntry>& trace() const { return m_trace; }
    const Topology& topology() const { return m_topo; }
    const QkdLink& link(NodeId u, NodeId v) const;
    QkdLink& link(NodeId u, NodeId v);
    const GpsrqNode& gpsrq(NodeId n) const;
    const DvRoutingTable& dvTable(NodeId n) const;
    std::vector<std::string> cacheDump(double now) const;
    const SimulationConfig& config() const { return m_cfg; }

private:
    struct Direction {
        double busyUntil = 0.0;
        std::size_t backlog = 0;
        double busySeconds = 0.0;   // serialization time since the last key round
    };
    struct LinkState {
        QkdLink link;
        Direction dir[2];
        bool dvAvailable = true;
        std::uint32_t keyIds = 0;
    };
    struct NodeState {
        Position pos;
        std::vector<std::pair<NodeId, std::size_t>> links;   // neighbor -> link index, by neighbor id
        PriorityQueueSet queue;
        std::optional<GpsrqNode> gpsrq;
        std::optional<DvRoutingTable> dv;
        bool retryPending = false;
        bool signalPending = false;
        bool dvTriggerPending = false;
        double nextDvPeriodic = 0.0;
        std::vector<double> lastHeard;   // per entry in `links`, dead-interval mode
        std::vector<bool> helloAlive;
    };
    enum class DvTimerKind : std::uint32_t { Periodic, Triggered, Hello, LinkCheck };

    void setup();
    void dispatch(const SimEvent& e);
    void hashEvent(const SimEvent& e);

    void generateTraffic();
    PacketId newDataPacket(NodeId src, NodeId dst, TrafficClass cls, std::size_t payloadBytes);
    void acceptAtNode(NodeId node, PacketId id, std::optional<NodeId> from);
    void serviceNode(NodeId node);
    void armRetry(NodeId node);
    bool serveSignaling(NodeId node, SimPacket& pkt);
    bool serveData(NodeId node, SimPacket& pkt);

    void transmit(NodeId from, NodeId to, PacketId id, Bits keyCost);
    void onArrival(NodeId node, PacketId id, NodeId from);
    void deliver(PacketId id);
    void drop(PacketId id, std::uint64_t& counter);

    void onCharge(std::size_t linkIdx);
    void broadcastMean(NodeId node);
    void onThreshold(NodeId node, NodeId from, double mean);

    void dvRouteData(NodeId node, PacketId id);
    void dvTimer(NodeId node, DvTimerKind kind, std::uint32_t arg);
    void dvSend(NodeId node, NodeId neighbor, std::vector<DvAdvert> entries, bool hello);
    void dvReevaluate(std::size_t linkIdx);
    void dvWatchPublicChannel(std::size_t linkIdx);
    void dvLinkChange(NodeId node, NodeId neighbor, bool up);
    void dvScheduleTrigger(NodeId node);
    bool dvLinkUsable(const LinkState& ls) const;

    std::vector<CandidateLink> candidates(NodeId node, const SimPacket& pkt) const;
    std::size_t linkIndex(NodeId u, NodeId v) const;
    std::optional<std::size_t> findLink(NodeId u, NodeId v) const;
    Bits controlCost(std::size_t payloadBytes) const { return m_cfg.controlCost.cost(payloadBytes); }

    SimulationConfig m_cfg;
    Topology m_topo;
    NodeId m_source = 0;
    NodeId m_destination = 0;
    std::vector<NodeState> m_nodes;   // dense ids
    std::vector<LinkState> m_links;
    std::vector<SimPacket> m_packets;
    std::vector<bool> m_alive;
    std::vector<HeaderBytes> m_wire;   // headers as last transmitted
    std::unordered_map<PacketId, std::vector<DvAdvert>> m_dvAdverts;
    EventQueue m_events;
    Rng m_roundRng;
    Rng m_trafficRng;
    Rng m_dvRng;
    KeyCostModel m_dataCost;
    bool m_trafficEnabled = true;
    bool m_started = false;
    double m_trafficInterval = 0.0;
    std::uint32_t m_hopLimit = 0;
    std::uint32_t m_messageIds = 0;

    RunStats m_stats;
    double m_delaySum = 0.0;
    double m_hopSum = 0.0;
    std::vector<TraceEntry> m_trace;
};

/// Convenience wrapper: build a simulator and run it.
RunStats runSimulation(const SimulationConfig& cfg, const Topology& topology);

} // namespace qkdnet
