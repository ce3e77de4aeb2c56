#include "qkdnet/simulator.hpp"

#include "qkdnet/link_metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace qkdnet {

namespace {

constexpr std::uint32_t kNone = 0xFFFFFFFFu;
constexpr std::uint32_t kCbr = 0xFFFFFFFEu;
constexpr std::uint16_t kCommandDvHello = 9;
constexpr std::size_t kThresholdValueBytes = 8;

double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void mix(std::uint64_t& h, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ULL;
    }
}

} // namespace

const char* toString(Protocol p) noexcept
{
    return p == Protocol::Gpsrq ? "gpsrq" : "dv";
}

Protocol parseProtocol(const std::string& s)
{
    if (s == "gpsrq")
        return Protocol::Gpsrq;
    if (s == "dv")
        return Protocol::Dv;
    throw std::invalid_argument("unknown protocol '" + s + "'");
}

void SimulationConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw std::invalid_argument(what);
    };
    require(duration > 0.0 && std::isfinite(duration), "duration must be positive");
    require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0,1]");
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0,1]");
    require(tAverageWindow >= 1, "t_avg_window must be at least 1");
    require(traffic.rateBps >= 0.0, "traffic rate must be non-negative");
    require(traffic.packetBytes > 0, "packet size must be positive");
    require(traffic.cls != TrafficClass::Premium, "user traffic cannot be Premium");
    require(link.minKeyBytes > 0 && link.minKeyBytes < link.maxKeyBytes, "need 0 < min_key_bytes < max_key_bytes");
    require(link.initKeyMinBytes >= 0 && link.initKeyMinBytes <= link.initKeyMaxBytes
                && link.initKeyMaxBytes <= link.maxKeyBytes,
            "init_key_bytes_range must lie within [0, max_key_bytes]");
    require(link.chargeRateBps > 0, "rate_bps must be positive");
    require(link.chargePeriod > 0, "charge_period_s must be positive");
    require(link.bandwidthBps > 0, "bandwidth_bps must be positive");
    require(queueCapacity > 0, "queue capacity must be positive");
    require(propagationDelay >= 0, "propagation delay must be non-negative");
    require(maxDelayRealTime > 0 && maxDelayRealTime < 32.0, "RealTime max delay must lie in (0, 32) s");
    require(maxDelayBestEffort > 0 && maxDelayBestEffort < 32.0, "BestEffort max delay must lie in (0, 32) s");
    require(retryInterval > 0, "retry interval must be positive");
    require(dv.period > 0 && dv.mergeWindow >= 0, "bad DV timers");
    require(dv.helloInterval > 0 && dv.deadInterval > dv.helloInterval, "bad DV hello/dead intervals");
    require(controlCost.authKeyBits >= 0, "auth_key_bits must be non-negative");
}

double SimulationConfig::maxDelayFor(TrafficClass c) const
{
    return c == TrafficClass::RealTime ? maxDelayRealTime : maxDelayBestEffort;
}

Simulator::Simulator(SimulationConfig cfg, Topology topology)
    : m_cfg(std::move(cfg))
    , m_topo(std::move(topology))
    , m_roundRng(makeStream(m_cfg.seed, "round-durations"))
    , m_trafficRng(makeStream(m_cfg.seed, "traffic-jitter"))
    , m_dvRng(makeStream(m_cfg.seed, "dv-phase"))
{
    m_cfg.validate();
    if (m_topo.nodeCount() < 2)
        throw std::invalid_argument("topology needs at least two nodes");
    if (!m_topo.hasDenseIds())
        throw std::invalid_argument("topology node ids must be 0..n-1");
    if (!m_topo.isConnected())
        throw std::invalid_argument("topology is not connected");
    m_source = m_cfg.source.value_or(m_topo.nodes().begin()->first);
    m_destination = m_cfg.destination.value_or(m_topo.nodes().rbegin()->first);
    if (!m_topo.hasNode(m_source) || !m_topo.hasNode(m_destination) || m_source == m_destination)
        throw std::invalid_argument("bad source/destination");
    for (const Edge& e : m_cfg.disabledLinks)
        if (!m_topo.hasEdge(e.u, e.v))
            throw std::invalid_argument("disabled link is not in the topology");
    setup();
}

void Simulator::setup()
{
    m_cfg.rounds.mean = m_cfg.link.chargePeriod;
    m_dataCost.cipher = m_cfg.traffic.cipher;
    m_dataCost.authKeyBits = m_cfg.controlCost.authKeyBits;

    Rng keyRng = makeStream(m_cfg.seed, "initial-keys");
    const Bits minBits = bytesToBits(m_cfg.link.minKeyBytes);
    const Bits maxBits = bytesToBits(m_cfg.link.maxKeyBytes);
    for (const Edge& e : m_topo.edges()) {
        LinkState ls;
        ls.link.a = e.u;
        ls.link.b = e.v;
        const double initBytes = m_cfg.link.initKeyMinBytes
                               + uniform01(keyRng) * (m_cfg.link.initKeyMaxBytes - m_cfg.link.initKeyMinBytes);
        const Bits init = bytesToBits(initBytes);
        ls.link.storage = KeyStorage(minBits, init, maxBits, m_cfg.link.chargeRateBps, m_cfg.link.chargePeriod);
        ls.link.stats = PublicChannelStats(m_cfg.tAverageWindow, m_cfg.link.chargePeriod);
        ls.link.bandwidthBps = m_cfg.link.bandwidthBps;
        ls.link.initialBits = init;
        ls.link.publicChannelUp =
            std::find(m_cfg.disabledLinks.begin(), m_cfg.disabledLinks.end(), e) == m_cfg.disabledLinks.end();
        m_links.push_back(ls);
    }

    const GpsrqConfig gcfg{m_cfg.beta, m_cfg.alpha, m_cfg.cacheEnabled};
    m_nodes.resize(m_topo.nodeCount());
    for (const auto& [n, pos] : m_topo.nodes()) {
        NodeState& ns = m_nodes[n];
        ns.pos = pos;
        ns.queue = PriorityQueueSet(m_cfg.queueCapacity);
        if (m_cfg.protocol == Protocol::Gpsrq)
            ns.gpsrq.emplace(n, ns.pos, gcfg);
        else
            ns.dv.emplace(n);
    }
    for (std::size_t i = 0; i < m_links.size(); ++i) {
        m_nodes[m_links[i].link.a].links.emplace_back(m_links[i].link.b, i);
        m_nodes[m_links[i].link.b].links.emplace_back(m_links[i].link.a, i);
    }
    for (NodeState& ns : m_nodes) {
        std::sort(ns.links.begin(), ns.links.end());
        ns.lastHeard.assign(ns.links.size(), 0.0);
        ns.helloAlive.assign(ns.links.size(), true);
    }

    m_hopLimit = static_cast<std::uint32_t>(4 * m_topo.edgeCount());
    m_stats.minTransmissionDelay =
        static_cast<double>((m_cfg.traffic.packetBytes + kHeaderOverheadBytes) * 8) / m_cfg.link.bandwidthBps;

    if (m_cfg.chargingEnabled) {
        for (std::size_t i = 0; i < m_links.size(); ++i)
            if (m_cfg.link.chargePeriod <= m_cfg.duration)
                m_events.schedule(m_cfg.link.chargePeriod, EventKind::KeyCharge, static_cast<std::uint32_t>(i));
    }

    if (m_cfg.protocol == Protocol::Dv) {
        for (const auto& [n, pos] : m_topo.nodes()) {
            m_nodes[n].nextDvPeriodic = uniform01(m_dvRng) * m_cfg.dv.period;
            m_events.schedule(m_nodes[n].nextDvPeriodic, EventKind::DvTimer, n,
                              static_cast<std::uint32_t>(DvTimerKind::Periodic));
            if (m_cfg.dv.mode == DvMode::DeadInterval)
                m_events.schedule(uniform01(m_dvRng) * m_cfg.dv.helloInterval, EventKind::DvTimer, n,
                                  static_cast<std::uint32_t>(DvTimerKind::Hello));
        }
        for (std::size_t i = 0; i < m_links.size(); ++i) {
            m_links[i].dvAvailable = dvLinkUsable(m_links[i]);
            dvWatchPublicChannel(i);
        }
    }

    m_events.schedule(m_cfg.duration, EventKind::SimulationEnd);
}

PacketId Simulator::injectPacket(NodeId src, NodeId dst, double at, TrafficClass cls, std::size_t payloadBytes)
{
    if (m_started)
        throw std::logic_error("injectPacket must precede run()");
    if (!m_topo.hasNode(src) || !m_topo.hasNode(dst) || src == dst)
        throw std::invalid_argument("bad injected packet endpoints");
    const PacketId id = static_cast<PacketId>(m_packets.size());
    m_packets.emplace_back();
    m_alive.push_back(false);
    m_wire.emplace_back();
    SimPacket& p = m_packets.back();
    p.id = id;
    p.src = src;
    p.dst = dst;
    p.cls = cls;
    p.payloadLen = payloadBytes;
    p.createdAt = at;
    m_events.schedule(at, EventKind::PacketArrival, src, id, kNone);
    return id;
}

RunStats Simulator::run()
{
    if (m_started)
        throw std::logic_error("a simulator runs once");
    m_started = true;

    const double rate = m_cfg.traffic.rateBps;
    if (m_trafficEnabled && rate > 0) {
        m_trafficInterval = static_cast<double>(m_cfg.traffic.packetBytes * 8) / rate;
        const double first = m_cfg.traffic.startTime + uniform01(m_trafficRng) * m_trafficInterval;
        if (first < m_cfg.duration)
            m_events.schedule(first, EventKind::PacketArrival, m_source, kCbr, kNone);
    }

    std::uint64_t h = 0xcbf29ce484222325ULL;
    m_stats.traceHash = h;
    while (!m_events.empty()) {
        const double before = m_events.now();
        SimEvent e = m_events.pop();
        if (e.fireAt < before)
            ++m_stats.causalityViolations;
        hashEvent(e);
        ++m_stats.events;
        if (e.kind == EventKind::SimulationEnd)
            break;
        dispatch(e);
    }

    for (std::size_t i = 0; i < m_packets.size(); ++i)
        if (m_alive[i] && m_packets[i].kind == PacketKind::Data)
            ++m_stats.inFlight;
    for (const LinkState& ls : m_links)
        if (!ls.link.conservationHolds())
            m_stats.keyConservation = false;
    m_stats.pdr = m_stats.sent ? static_cast<double>(m_stats.received) / static_cast<double>(m_stats.sent) : 0.0;
    if (m_stats.received) {
        m_stats.meanDelay = m_delaySum / static_cast<double>(m_stats.received);
        m_stats.meanHops = m_hopSum / static_cast<double>(m_stats.received);
    }
    return m_stats;
}

void Simulator::hashEvent(const SimEvent& e)
{
    std::uint64_t& h = m_stats.traceHash;
    mix(h, std::bit_cast<std::uint64_t>(e.fireAt));
    mix(h, static_cast<std::uint64_t>(e.kind));
    mix(h, (static_cast<std::uint64_t>(e.a) << 32) | e.b);
    mix(h, e.c);
}

void Simulator::dispatch(const SimEvent& e)
{
    switch (e.kind) {
    case EventKind::PacketArrival:
        if (e.b == kCbr)
            generateTraffic();
        else if (e.c == kNone)
            acceptAtNode(e.a, e.b, std::nullopt);
        else
            onArrival(e.a, e.b, e.c);
        break;
    case EventKind::LinkTransmitDone:
        --m_links[e.a].dir[e.b].backlog;
        break;
    case EventKind::KeyCharge:
        onCharge(e.a);
        break;
    case EventKind::SignalingTimer:
        broadcastMean(e.a);
        break;
    case EventKind::DvTimer:
        dvTimer(e.a, static_cast<DvTimerKind>(e.b), e.c);
        break;
    case EventKind::RetryTimer:
        m_nodes[e.a].retryPending = false;
        serviceNode(e.a);
        break;
    case EventKind::CacheExpiry:
        if (m_nodes[e.a].gpsrq)
            m_nodes[e.a].gpsrq->cache().purgeExpired(m_events.now());
        serviceNode(e.a);
        break;
    case EventKind::SimulationEnd:
        break;
    }
}

PacketId Simulator::newDataPacket(NodeId src, NodeId dst, TrafficClass cls, std::size_t payloadBytes)
{
    const PacketId id = static_cast<PacketId>(m_packets.size());
    m_packets.emplace_back();
    m_alive.push_back(true);
    m_wire.emplace_back();
    SimPacket& p = m_packets.back();
    p.id = id;
    p.kind = PacketKind::Data;
    p.src = src;
    p.dst = dst;
    p.cls = cls;
    p.payloadLen = payloadBytes;
    p.createdAt = m_events.now();
    p.maxDelay = m_cfg.maxDelayFor(cls);
    p.qkd.length = static_cast<std::uint32_t>(p.wireBytes());
    p.qkd.messageId = ++m_messageIds;
    p.qkd.e = m_cfg.traffic.cipher == Cipher::Otp ? wire::kCipherOtp : wire::kCipherAes;
    p.qkd.a = wire::kAuthVmac;
    p.qkd.v = wire::kVersion;
    p.qkd.maxDelay = static_cast<std::uint16_t>(std::lround(p.maxDelay * 1000.0));
    p.qkd.timestamp = encodeMillis(p.createdAt);
    p.cmd.protocol = wire::kProtocolData;
    p.trail.push_back(src);
    ++m_stats.sent;
    return id;
}

void Simulator::generateTraffic()
{
    const Classification c = classify(AppTag::UserFlow, m_cfg.traffic.cls);
    const PacketId id = newDataPacket(m_source, m_destination, c.cls, m_cfg.traffic.packetBytes);
    const double next = m_events.now() + m_trafficInterval;
    if (next < m_cfg.duration)
        m_events.schedule(next, EventKind::PacketArrival, m_source, kCbr, kNone);
    acceptAtNode(m_source, id, std::nullopt);
}

void Simulator::acceptAtNode(NodeId node, PacketId id, std::optional<NodeId> from)
{
    SimPacket& pkt = m_packets[id];
    if (!m_alive[id]) {
        // scripted packet entering the network now
        m_alive[id] = true;
        pkt.kind = PacketKind::Data;
        pkt.maxDelay = m_cfg.maxDelayFor(pkt.cls);
        pkt.createdAt = m_events.now();
        pkt.qkd.length = static_cast<std::uint32_t>(pkt.wireBytes());
        pkt.qkd.messageId = ++m_messageIds;
        pkt.qkd.e = wire::kCipherOtp;
        pkt.qkd.a = wire::kAuthVmac;
        pkt.qkd.v = wire::kVersion;
        pkt.qkd.maxDelay = static_cast<std::uint16_t>(std::lround(pkt.maxDelay * 1000.0));
        pkt.qkd.timestamp = encodeMillis(pkt.createdAt);
        pkt.cmd.protocol = wire::kProtocolData;
        pkt.trail.assign(1, node);
        ++m_stats.sent;
    }
    (void)from;
    if (m_cfg.protocol == Protocol::Dv && pkt.kind == PacketKind::Data) {
        dvRouteData(node, id);
        return;
    }
    if (!m_nodes[node].queue.enqueue(pkt.cls, id)) {
        if (pkt.kind == PacketKind::Data)
            drop(id, m_stats.dropQueue);
        else {
            ++m_stats.controlDrops;
            m_alive[id] = false;
        }
        return;
    }
    serviceNode(node);
}

void Simulator::serviceNode(NodeId node)
{
    NodeState& ns = m_nodes[node];
    while (auto head = ns.queue.front()) {
        for (std::size_t c = static_cast<std::size_t>(head->cls) + 1; c < kTrafficClassCount; ++c)
            if (ns.queue.size(static_cast<TrafficClass>(c)) > 0)
                ++m_stats.priorityViolations;
        SimPacket& pkt = m_packets[head->id];
        const bool done = pkt.kind == PacketKind::Data ? serveData(node, pkt) : serveSignaling(node, pkt);
        if (!done) {
            armRetry(node);
            return;
        }
    }
}

void Simulator::armRetry(NodeId node)
{
    NodeState& ns = m_nodes[node];
    if (ns.retryPending)
        return;
    const double at = m_events.now() + m_cfg.retryInterval;
    if (at >= m_cfg.duration)
        return;
    ns.retryPending = true;
    m_events.schedule(at, EventKind::RetryTimer, node);
}

bool Simulator::serveSignaling(NodeId node, SimPacket& pkt)
{
    const NodeId to = *pkt.fixedNextHop;
    const LinkState& ls = m_links[linkIndex(node, to)];
    const Bits cost = controlCost(kThresholdValueBytes);
    if (!ls.link.publicChannelUp) {
        m_nodes[node].queue.dequeue();
        ++m_stats.controlDrops;
        m_alive[pkt.id] = false;
        return true;
    }
    if (!ls.link.storage.canConsume(cost, pkt.cls))
        return false;
    m_nodes[node].queue.dequeue();
    transmit(node, to, pkt.id, cost);
    return true;
}

std::vector<CandidateLink> Simulator::candidates(NodeId node, const SimPacket& pkt) const
{
    std::vector<CandidateLink> out;
    const NodeState& ns = m_nodes[node];
    out.reserve(ns.links.size());
    const double now = m_events.now();
    for (const auto& [nb, li] : ns.links) {
        const QkdLink& link = m_links[li].link;
        CandidateLink c;
        c.neighbor = nb;
        c.position = m_nodes[nb].pos;
        c.admissible = admit(link, pkt, m_dataCost).has_value();
        const double thr = ns.gpsrq->threshold(nb).value_or(static_cast<double>(link.storage.maximum()));
        const MetricSnapshot snap = measureLink(link.storage, thr, link.stats, m_cfg.alpha, now);
        c.publicMetric = snap.pM;
        c.routeMetric = snap.rM;
        c.cacheTtl = cacheTtl(link.stats);
        out.push_back(c);
    }
    return out;
}

bool Simulator::serveData(NodeId node, SimPacket& pkt)
{
    NodeState& ns = m_nodes[node];
    const double now = m_events.now();
    if (node == pkt.src && now - pkt.createdAt > pkt.maxDelay) {
        ns.queue.dequeue();
        drop(pkt.id, m_stats.dropDelay);
        return true;
    }

    const std::vector<CandidateLink> links = candidates(node, pkt);
    RoutingRequest req;
    req.self = node;
    req.selfPos = ns.pos;
    req.dst = pkt.dst;
    req.dstPos = m_nodes[pkt.dst].pos;
    req.isSource = node == pkt.src;
    req.arrivedFrom = pkt.arrivedFrom;
    if (pkt.trail.size() >= 2)
        req.returnTo = pkt.trail[pkt.trail.size() - 2];
    const std::int32_t age = elapsedMillis(encodeMillis(now), pkt.qkd.timestamp);
    req.delayExpired = age < 0 || age > static_cast<std::int32_t>(pkt.qkd.maxDelay);
    req.now = now;
    req.fields = readGpsrqFields(pkt.qkd, pkt.cmd);
    req.links = links;
    req.locate = [this](NodeId n) { return m_nodes.at(n).pos; };

    RouteDecision d = ns.gpsrq->decide(req);
    std::optional<Bits> cost;
    if (d.action == RouteAction::Forward || d.action == RouteAction::Return) {
        cost = admit(m_links[linkIndex(node, d.nextHop)].link, pkt, m_dataCost);
        if (!cost)
            d.action = RouteAction::Wait;
    }
    if (d.action == RouteAction::Wait)
        return false;

    ns.queue.dequeue();
    ns.gpsrq->commit(d);
    if (m_cfg.cacheEnabled) {
        m_stats.cacheRecords += d.newRecords.size();
        for (const CacheRecord& r : d.newRecords)
            if (r.expiresAt < m_cfg.duration)
                m_events.schedule(r.expiresAt, EventKind::CacheExpiry, node);
    }
    if (m_cfg.recordTrace) {
        TraceEntry t;
        t.time = now;
        t.node = node;
        t.packet = pkt.id;
        t.from = pkt.arrivedFrom;
        t.action = d.action;
        t.mode = d.mode;
        t.nextHop = d.nextHop;
        t.fields = d.fields;
        t.newRecords = m_cfg.cacheEnabled ? d.newRecords : std::vector<CacheRecord>{};
        t.loopDetected = d.loopDetected;
        t.delayReturn = d.delayReturn;
        m_trace.push_back(std::move(t));
    }

    if (d.loopDetected)
        ++m_stats.loopDetections;
    if (d.action == RouteAction::Return)
        ++(d.delayReturn ? m_stats.delayReturns : m_stats.deadEndReturns);
    if (d.mode == ForwardMode::RecoveryEntry)
        ++m_stats.recoveryEntries;
    if (d.action == RouteAction::Discard) {
        drop(pkt.id, m_stats.dropSource);
        return true;
    }
    writeGpsrqFields(d.fields, pkt.qkd, pkt.cmd);
    if (d.fields.loop == 1 && !pkt.everReturned) {
        pkt.everReturned = true;
        ++m_stats.returnedPackets;
    }
    if (d.fields.loop == 2 && !pkt.everLoop2) {
        pkt.everLoop2 = true;
        ++m_stats.loop2Packets;
    }
    transmit(node, d.nextHop, pkt.id, *cost);
    return true;
}

void Simulator::transmit(NodeId from, NodeId to, PacketId id, Bits keyCost)
{
    SimPacket& pkt = m_packets[id];
    const std::size_t li = linkIndex(from, to);
    LinkState& ls = m_links[li];
    const std::uint32_t side = from == ls.link.a ? 0 : 1;
    Direction& dir = ls.dir[side];
    const bool data = pkt.kind == PacketKind::Data;

    if (dir.backlog >= m_cfg.queueCapacity) {
        if (data)
            drop(id, m_stats.dropQueue);
        else {
            ++m_stats.controlDrops;
            m_alive[id] = false;
            m_dvAdverts.erase(id);
        }
        return;
    }
    if (!ls.link.storage.consume(keyCost, pkt.cls))
        throw std::logic_error("transmit without admissible key");
    ls.link.consumedBits += keyCost;
    (data ? m_stats.keyDataBits : m_stats.keyRoutingBits) += keyCost;

    pkt.qkd.channel = static_cast<std::uint16_t>(li & 0xFFFF);
    pkt.qkd.encryptionKeyId = ++ls.keyIds;
    pkt.qkd.authenticationKeyId = ++ls.keyIds;
    pkt.qkd.authenticationTag = static_cast<std::uint32_t>(mixSeed((std::uint64_t{pkt.qkd.messageId} << 20) ^ ls.keyIds));

    std::size_t txBytes = pkt.wireBytes();
    if (pkt.kind == PacketKind::Threshold) {
        txBytes += m_cfg.handshakeBytes;
        m_stats.overheadPackets += 1 + m_cfg.handshakePackets;
        m_stats.overheadBytes += txBytes;
    } else if (pkt.kind == PacketKind::DvUpdate) {
        m_stats.overheadPackets += 1;
        m_stats.overheadBytes += txBytes;
    } else {
        ++pkt.hopCount;
        m_stats.maxForwardings = std::max(m_stats.maxForwardings, pkt.hopCount);
    }
    m_wire[id] = serializeHeaders(pkt.qkd, pkt.cmd);

    const double now = m_events.now();
    const double start = std::max(now, dir.busyUntil);
    const double busy = static_cast<double>(txBytes * 8) / ls.link.bandwidthBps;
    const double done = start + busy;
    dir.busyUntil = done;
    dir.busySeconds += busy;
    ++dir.backlog;
    m_events.schedule(done, EventKind::LinkTransmitDone, static_cast<std::uint32_t>(li), side);
    m_events.schedule(done + m_cfg.propagationDelay, EventKind::PacketArrival, to, id, from);

    if (m_cfg.protocol == Protocol::Dv)
        dvReevaluate(li);
}

void Simulator::onArrival(NodeId node, PacketId id, NodeId from)
{
    SimPacket& pkt = m_packets[id];
    const auto [qkd, cmd] = deserializeHeaders(m_wire[id]);
    pkt.qkd = qkd;
    pkt.cmd = cmd;

    if (pkt.kind == PacketKind::Threshold) {
        m_alive[id] = false;
        onThreshold(node, from, pkt.signalingValue);
        return;
    }
    if (pkt.kind == PacketKind::DvUpdate) {
        m_alive[id] = false;
        NodeState& ns = m_nodes[node];
        auto it = std::lower_bound(ns.links.begin(), ns.links.end(), std::make_pair(from, std::size_t{0}));
        const std::size_t slot = static_cast<std::size_t>(it - ns.links.begin());
        ns.lastHeard[slot] = m_events.now();
        if (!ns.helloAlive[slot]) {
            ns.helloAlive[slot] = true;
            dvLinkChange(node, from, true);
        }
        if (pkt.cmd.command == wire::kCommandDvUpdate) {
            auto adv = m_dvAdverts.find(id);
            if (adv != m_dvAdverts.end()) {
                if (ns.dv->applyAdvert(from, adv->second))
                    dvScheduleTrigger(node);
                m_dvAdverts.erase(adv);
            }
        }
        return;
    }

    if (pkt.dst == node) {
        deliver(id);
        return;
    }
    if (pkt.hopCount >= m_hopLimit) {
        ++m_stats.hopLimitDrops;
        drop(id, m_stats.dropDelay);
        return;
    }
    if (m_cfg.protocol == Protocol::Dv) {
        dvRouteData(node, id);
        return;
    }

    const GpsrqFields f = readGpsrqFields(pkt.qkd, pkt.cmd);
    if (f.loop == 1) {
        if (!pkt.trail.empty() && pkt.trail.back() == from)
            pkt.trail.pop_back();
        if (pkt.trail.empty() || pkt.trail.back() != node)
            pkt.trail.push_back(node);
    } else {
        auto it = std::find(pkt.trail.begin(), pkt.trail.end(), node);
        if (it != pkt.trail.end())
            pkt.trail.erase(it + 1, pkt.trail.end());
        else
            pkt.trail.push_back(node);
    }
    pkt.arrivedFrom = from;
    acceptAtNode(node, id, from);
}

void Simulator::deliver(PacketId id)
{
    SimPacket& pkt = m_packets[id];
    m_alive[id] = false;
    ++m_stats.received;
    m_delaySum += m_events.now() - pkt.createdAt;
    m_hopSum += pkt.hopCount;
    pkt.trail.clear();
    pkt.trail.shrink_to_fit();
}

void Simulator::drop(PacketId id, std::uint64_t& counter)
{
    m_alive[id] = false;
    ++counter;
    m_packets[id].trail.clear();
    m_packets[id].trail.shrink_to_fit();
}

void Simulator::onCharge(std::size_t li)
{
    LinkState& ls = m_links[li];
    const double now = m_events.now();
    if (ls.link.publicChannelUp) {
        ls.link.chargedBits += ls.link.storage.charge();
        // Public channel load over the round: utilization of the busier direction.
        const double occupancy = std::max(ls.dir[0].busySeconds, ls.dir[1].busySeconds) / m_cfg.link.chargePeriod;
        ls.link.stats.recordKeyRound(m_cfg.rounds.sample(m_roundRng, occupancy), now);
    }
    ls.dir[0].busySeconds = 0.0;
    ls.dir[1].busySeconds = 0.0;
    const double next = now + m_cfg.link.chargePeriod;
    if (next <= m_cfg.duration)
        m_events.schedule(next, EventKind::KeyCharge, static_cast<std::uint32_t>(li));

    if (m_cfg.protocol == Protocol::Gpsrq) {
        for (NodeId n : {ls.link.a, ls.link.b}) {
            if (m_nodes[n].signalPending)
                continue;
            m_nodes[n].signalPending = true;
            m_events.schedule(now, EventKind::SignalingTimer, n);
        }
    } else {
        dvReevaluate(li);
        dvWatchPublicChannel(li);
    }
}

void Simulator::dvWatchPublicChannel(std::size_t li)
{
    const QkdLink& link = m_links[li].link;
    if (!link.publicChannelUp)
        return;
    // P_m passes 1 at this instant unless another round completes first
    const PublicChannelStats& st = link.stats;
    const double crossAt = st.lastRecordedAt() + st.maximal() - st.lastDuration() + 1e-6;
    if (crossAt > m_events.now() && crossAt < m_cfg.duration)
        m_events.schedule(crossAt, EventKind::DvTimer, link.a, static_cast<std::uint32_t>(DvTimerKind::LinkCheck),
                          static_cast<std::uint32_t>(li));
}

void Simulator::broadcastMean(NodeId node)
{
    NodeState& ns = m_nodes[node];
    ns.signalPending = false;
    std::vector<double> levels;
    for (const auto& [nb, li] : ns.links)
        levels.push_back(static_cast<double>(m_links[li].link.storage.current()));
    const double mean = localMeanKey(levels);
    ns.gpsrq->recordAdvertisedMean(mean);

    for (const auto& [nb, li] : ns.links) {
        if (!m_links[li].link.publicChannelUp)
            continue;
        const PacketId id = static_cast<PacketId>(m_packets.size());
        m_packets.emplace_back();
        m_alive.push_back(true);
        m_wire.emplace_back();
        SimPacket& p = m_packets.back();
        p.id = id;
        p.kind = PacketKind::Threshold;
        p.src = node;
        p.dst = nb;
        p.cls = classify(AppTag::Signaling).cls;
        p.payloadLen = kThresholdValueBytes + m_cfg.transportHeaderBytes;
        p.createdAt = m_events.now();
        p.qkd.length = static_cast<std::uint32_t>(p.wireBytes());
        p.qkd.messageId = ++m_messageIds;
        p.qkd.e = wire::kCipherOtp;
        p.qkd.a = wire::kAuthVmac;
        p.qkd.v = wire::kVersion;
        p.qkd.timestamp = encodeMillis(p.createdAt);
        p.cmd.protocol = wire::kProtocolGpsrq;
        p.cmd.command = wire::kCommandThreshold;
        p.fixedNextHop = nb;
        p.signalingValue = mean;
        if (!ns.queue.enqueue(p.cls, id)) {
            ++m_stats.controlDrops;
            m_alive[id] = false;
        }
    }
    serviceNode(node);
}

void Simulator::onThreshold(NodeId node, NodeId from, double mean)
{
    NodeState& ns = m_nodes[node];
    ns.gpsrq->recordNeighborMean(from, mean);
    if (auto thr = ns.gpsrq->threshold(from)) {
        QkdLink& link = m_links[linkIndex(node, from)].link;
        link.storage.setThreshold(static_cast<Bits>(std::llround(*thr)));
    }
    serviceNode(node);
}

// --- distance-vector baseline -------------------------------------------------

bool Simulator::dvLinkUsable(const LinkState& ls) const
{
    if (!ls.link.publicChannelUp)
        return false;
    if (publicMetric(ls.link.stats, m_events.now()) > 1.0)
        return false;
    return ls.link.storage.canConsume(m_dataCost.cost(m_cfg.traffic.packetBytes), m_cfg.traffic.cls);
}

void Simulator::dvReevaluate(std::size_t li)
{
    LinkState& ls = m_links[li];
    const bool usable = dvLinkUsable(ls);
    if (m_cfg.dv.mode == DvMode::DeadInterval || usable == ls.dvAvailable)
        return;
    ls.dvAvailable = usable;
    dvLinkChange(ls.link.a, ls.link.b, usable);
    dvLinkChange(ls.link.b, ls.link.a, usable);
}

void Simulator::dvLinkChange(NodeId node, NodeId neighbor, bool up)
{
    DvRoutingTable& t = *m_nodes[node].dv;
    if (up) {
        t.linkUp();
        dvSend(node, neighbor, t.fullDump(), false);
        dvScheduleTrigger(node);
    } else if (t.linkDown(neighbor)) {
        dvScheduleTrigger(node);
    }
}

void Simulator::dvScheduleTrigger(NodeId node)
{
    NodeState& ns = m_nodes[node];
    if (ns.dvTriggerPending)
        return;
    const double now = m_events.now();
    if (ns.nextDvPeriodic - now <= m_cfg.dv.mergeWindow)
        return;   // folded into the upcoming periodic update
    ns.dvTriggerPending = true;
    m_events.schedule(now, EventKind::DvTimer, node, static_cast<std::uint32_t>(DvTimerKind::Triggered));
}

void Simulator::dvTimer(NodeId node, DvTimerKind kind, std::uint32_t arg)
{
    NodeState& ns = m_nodes[node];
    const double now = m_events.now();
    switch (kind) {
    case DvTimerKind::Periodic: {
        const std::vector<DvAdvert> all = ns.dv->periodicDump();
        for (const auto& [nb, li] : ns.links)
            dvSend(node, nb, all, false);
        ns.nextDvPeriodic = now + m_cfg.dv.period;
        if (ns.nextDvPeriodic < m_cfg.duration)
            m_events.schedule(ns.nextDvPeriodic, EventKind::DvTimer, node,
                              static_cast<std::uint32_t>(DvTimerKind::Periodic));
        break;
    }
    case DvTimerKind::Triggered: {
        ns.dvTriggerPending = false;
        const std::vector<DvAdvert> changed = ns.dv->changedDump();
        if (changed.empty())
            break;
        for (const auto& [nb, li] : ns.links)
            dvSend(node, nb, changed, false);
        break;
    }
    case DvTimerKind::Hello: {
        for (std::size_t s = 0; s < ns.links.size(); ++s) {
            dvSend(node, ns.links[s].first, {}, true);
            if (ns.helloAlive[s] && now - ns.lastHeard[s] > m_cfg.dv.deadInterval) {
                ns.helloAlive[s] = false;
                dvLinkChange(node, ns.links[s].first, false);
            }
        }
        const double next = now + m_cfg.dv.helloInterval;
        if (next < m_cfg.duration)
            m_events.schedule(next, EventKind::DvTimer, node, static_cast<std::uint32_t>(DvTimerKind::Hello));
        break;
    }
    case DvTimerKind::LinkCheck:
        dvReevaluate(arg);
        break;
    }
}

void Simulator::dvSend(NodeId node, NodeId neighbor, std::vector<DvAdvert> entries, bool hello)
{
    LinkState& ls = m_links[linkIndex(node, neighbor)];
    const std::size_t body = hello ? 4 : entries.size() * m_cfg.dvEntryBytes;
    const Bits cost = controlCost(body);
    if (!ls.link.publicChannelUp || !ls.link.storage.canConsume(cost, TrafficClass::Premium)) {
        ++m_stats.controlDrops;
        return;
    }
    const PacketId id = static_cast<PacketId>(m_packets.size());
    m_packets.emplace_back();
    m_alive.push_back(true);
    m_wire.emplace_back();
    SimPacket& p = m_packets.back();
    p.id = id;
    p.kind = PacketKind::DvUpdate;
    p.src = node;
    p.dst = neighbor;
    p.cls = classify(AppTag::Signaling).cls;
    p.payloadLen = body + m_cfg.datagramHeaderBytes;
    p.createdAt = m_events.now();
    p.qkd.length = static_cast<std::uint32_t>(p.wireBytes());
    p.qkd.messageId = ++m_messageIds;
    p.qkd.e = wire::kCipherOtp;
    p.qkd.a = wire::kAuthVmac;
    p.qkd.v = wire::kVersion;
    p.qkd.timestamp = encodeMillis(p.createdAt);
    p.cmd.protocol = wire::kProtocolDv;
    p.cmd.command = hello ? kCommandDvHello : wire::kCommandDvUpdate;
    if (!hello)
        m_dvAdverts.emplace(id, std::move(entries));
    transmit(node, neighbor, id, cost);
}

void Simulator::dvRouteData(NodeId node, PacketId id)
{
    SimPacket& pkt = m_packets[id];
    const auto next = m_nodes[node].dv->nextHop(pkt.dst);
    if (!next) {
        drop(id, m_stats.dropLink);
        return;
    }
    LinkState& ls = m_links[linkIndex(node, *next)];
    const auto cost = admit(ls.link, pkt, m_dataCost);
    if (!cost || publicMetric(ls.link.stats, m_events.now()) > 1.0) {
        drop(id, m_stats.dropLink);
        return;
    }
    transmit(node, *next, id, *cost);
}

// --- lookups -----------------------------------------------------------------

std::optional<std::size_t> Simulator::findLink(NodeId u, NodeId v) const
{
    if (u >= m_nodes.size())
        return std::nullopt;
    const auto& links = m_nodes[u].links;
    auto it = std::lower_bound(links.begin(), links.end(), std::make_pair(v, std::size_t{0}));
    if (it == links.end() || it->first != v)
        return std::nullopt;
    return it->second;
}

std::size_t Simulator::linkIndex(NodeId u, NodeId v) const
{
    auto li = findLink(u, v);
    if (!li)
        throw std::out_of_range("no link between the given nodes");
    return *li;
}

const QkdLink& Simulator::link(NodeId u, NodeId v) const
{
    return m_links[linkIndex(u, v)].link;
}

QkdLink& Simulator::link(NodeId u, NodeId v)
{
    return m_links[linkIndex(u, v)].link;
}

const GpsrqNode& Simulator::gpsrq(NodeId n) const
{
    if (n >= m_nodes.size() || !m_nodes[n].gpsrq)
        throw std::out_of_range("no GPSRQ state for node");
    return *m_nodes[n].gpsrq;
}

const DvRoutingTable& Simulator::dvTable(NodeId n) const
{
    if (n >= m_nodes.size() || !m_nodes[n].dv)
        throw std::out_of_range("no DV state for node");
    return *m_nodes[n].dv;
}

std::vector<std::string> Simulator::cacheDump(double now) const
{
    std::vector<std::string> out;
    for (std::size_t n = 0; n < m_nodes.size(); ++n) {
        if (!m_nodes[n].gpsrq)
            continue;
        auto lines = m_nodes[n].gpsrq->cache().dump(static_cast<NodeId>(n), now);
        out.insert(out.end(), lines.begin(), lines.end());
    }
    return out;
}

RunStats runSimulation(const SimulationConfig& cfg, const Topology& topology)
{
    Simulator sim(cfg, topology);
    return sim.run();
}

} // namespace qkdnet
