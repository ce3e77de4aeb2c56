#include "qkdnet/gpsrq.hpp"

#include <algorithm>
#include <cstdio>

namespace qkdnet {

void RouteCache::insert(const CacheRecord& r)
{
    m_records.push_back(r);
}

bool RouteCache::blocked(NodeId via, Position dst, double now) const
{
    return std::any_of(m_records.begin(), m_records.end(),
                       [&](const CacheRecord& r) { return r.covers(via, dst, now); });
}

void RouteCache::purgeExpired(double now)
{
    std::erase_if(m_records, [now](const CacheRecord& r) { return now >= r.expiresAt; });
}

std::vector<std::string> RouteCache::dump(NodeId owner, double now) const
{
    std::vector<std::string> lines;
    char buf[160];
    for (const auto& r : m_records) {
        if (now >= r.expiresAt)
            continue;
        std::snprintf(buf, sizeof buf, "CACHE %u %u %.6f %.6f %.6f %.6f", owner, r.via, r.center.x, r.center.y,
                      r.radius, r.expiresAt);
        lines.emplace_back(buf);
    }
    return lines;
}

const char* toString(RouteAction a) noexcept
{
    switch (a) {
    case RouteAction::Forward: return "forward";
    case RouteAction::Return: return "return";
    case RouteAction::Wait: return "wait";
    case RouteAction::Discard: return "discard";
    }
    return "?";
}

const char* toString(ForwardMode m) noexcept
{
    switch (m) {
    case ForwardMode::Direct: return "direct";
    case ForwardMode::Greedy: return "greedy";
    case ForwardMode::RecoveryEntry: return "recovery-entry";
    case ForwardMode::Recovery: return "recovery";
    case ForwardMode::Returned: return "returned";
    }
    return "?";
}

namespace {

bool usable(const CandidateLink& l)
{
    return l.admissible && l.publicMetric <= 1.0;
}

bool contains(std::span<const NodeId> ids, NodeId n)
{
    return std::find(ids.begin(), ids.end(), n) != ids.end();
}

const CandidateLink* findLink(std::span<const CandidateLink> links, NodeId n)
{
    for (const auto& l : links) {
        if (l.neighbor == n)
            return &l;
    }
    return nullptr;
}

} // namespace

std::optional<double> GpsrqNode::threshold(NodeId neighbor) const
{
    auto it = m_neighborMeans.find(neighbor);
    if (!m_advertised || it == m_neighborMeans.end())
        return std::nullopt;
    return std::min(*m_advertised, it->second);
}

bool GpsrqNode::blockedFor(NodeId via, const RoutingRequest& req, std::span<const NodeId> exclude,
                           std::span<const CacheRecord> pending) const
{
    if (contains(exclude, via))
        return true;
    if (m_cfg.cacheEnabled && m_cache.blocked(via, req.dstPos, req.now))
        return true;
    return std::any_of(pending.begin(), pending.end(),
                       [&](const CacheRecord& r) { return r.covers(via, req.dstPos, req.now); });
}

std::optional<NodeId> GpsrqNode::greedyNextHop(const RoutingRequest& req, std::span<const NodeId> exclude,
                                               std::span<const CacheRecord> pending) const
{
    const double selfDist = euclideanDistance(req.selfPos, req.dstPos);
    std::vector<const CandidateLink*> eligible;
    for (const auto& l : req.links) {
        if (!usable(l) || blockedFor(l.neighbor, req, exclude, pending))
            continue;
        if (l.neighbor == req.dst)
            return l.neighbor;
        if (m_cfg.beta > 0.0 && euclideanDistance(l.position, req.dstPos) >= selfDist)
            continue;
        eligible.push_back(&l);
    }
    if (eligible.empty())
        return std::nullopt;

    double maxDist = 0.0;
    for (const auto* l : eligible)
        maxDist = std::max(maxDist, euclideanDistance(l->position, req.dstPos));

    std::optional<NodeId> best;
    double bestScore = 0.0;
    for (const auto* l : eligible) {
        const double g = maxDist > 0.0 ? euclideanDistance(l->position, req.dstPos) / maxDist : 0.0;
        const double score = (1.0 - m_cfg.beta) * l->routeMetric + m_cfg.beta * g;
        if (!best || score < bestScore || (score == bestScore && l->neighbor < *best)) {
            best = l->neighbor;
            bestScore = score;
        }
    }
    return best;
}

RouteDecision GpsrqNode::decide(const RoutingRequest& req) const
{
    RouteDecision d;
    d.fields = req.fields;

    if (std::none_of(req.links.begin(), req.links.end(), usable)) {
        d.action = RouteAction::Wait;
        return d;
    }

    std::vector<NodeId> exclude;

    if (req.fields.loop == 1 && req.arrivedFrom) {
        // Returned by a neighbor that could not make progress.
        const NodeId from = *req.arrivedFrom;
        const Position blockPoint = req.locate(req.fields.recPosition);
        const double radius = std::max(euclideanDistance(blockPoint, req.dstPos) / 2.0, 1e-9);
        if (m_cfg.cacheEnabled) {
            const auto* link = findLink(req.links, from);
            const double ttl = link ? link->cacheTtl : 0.0;
            d.newRecords.push_back(CacheRecord{from, req.dstPos, radius, req.now + ttl});
        }
        exclude.push_back(from);
        d.fields.loop = 2;
        d.fields.inRecovery = false;
        return routeFresh(req, std::move(d), std::move(exclude));
    }

    if (!req.isSource && req.fields.loop == 0 && req.delayExpired) {
        d.delayReturn = true;
        return deadEnd(req, std::move(d));
    }

    if (req.fields.inRecovery) {
        if (req.fields.recPosition == m_id) {
            // Came back around to where recovery started.
            d.loopDetected = true;
            const NodeId firstHop = req.fields.recIf;
            if (m_cfg.cacheEnabled) {
                const auto* link = findLink(req.links, firstHop);
                const double radius = std::max(euclideanDistance(req.locate(firstHop), req.dstPos) / 2.0, 1e-9);
                d.newRecords.push_back(
                    CacheRecord{firstHop, req.dstPos, radius, req.now + (link ? link->cacheTtl : 0.0)});
            } else {
                exclude.push_back(firstHop);
            }
            d.fields.inRecovery = false;
            return routeFresh(req, std::move(d), std::move(exclude));
        }
        const Position start = req.locate(req.fields.recPosition);
        if (euclideanDistance(req.selfPos, req.dstPos) < euclideanDistance(start, req.dstPos)) {
            d.fields.inRecovery = false;
            return routeFresh(req, std::move(d), std::move(exclude));
        }
        return recoveryStep(req, std::move(d));
    }

    return routeFresh(req, std::move(d), std::move(exclude));
}

RouteDecision GpsrqNode::routeFresh(const RoutingRequest& req, RouteDecision d, std::vector<NodeId> hardExclude) const
{
    std::vector<NodeId> greedyExclude = hardExclude;
    if (req.arrivedFrom)
        greedyExclude.push_back(*req.arrivedFrom);

    if (auto next = greedyNextHop(req, greedyExclude, d.newRecords)) {
        d.action = RouteAction::Forward;
        d.mode = *next == req.dst ? ForwardMode::Direct : ForwardMode::Greedy;
        d.nextHop = *next;
        return d;
    }

    // Local maximum: first edge counterclockwise from the line toward the destination.
    // A fresh packet ignores cached routes here as well; a retried one
    // (loop=2) gives up as soon as the first edge is blocked.
    const bool skipBlocked = req.fields.loop == 0;
    std::vector<PlacedNeighbor> around;
    const std::optional<NodeId> pred = req.returnTo ? req.returnTo : req.arrivedFrom;
    bool anyOther = false;
    for (const auto& l : req.links) {
        if (!usable(l) || (skipBlocked && blockedFor(l.neighbor, req, hardExclude, d.newRecords)))
            continue;
        around.push_back({l.neighbor, l.position});
        if (!pred || l.neighbor != *pred)
            anyOther = true;
    }
    if (!anyOther)
        return deadEnd(req, std::move(d));

    const auto first = counterclockwiseFrom(req.selfPos, bearing(req.selfPos, req.dstPos), around);
    if (!first || blockedFor(*first, req, hardExclude, d.newRecords))
        return deadEnd(req, std::move(d));

    d.action = RouteAction::Forward;
    d.mode = ForwardMode::RecoveryEntry;
    d.nextHop = *first;
    d.fields.inRecovery = true;
    d.fields.recPosition = m_id;
    d.fields.recIf = *first;
    return d;
}

RouteDecision GpsrqNode::recoveryStep(const RoutingRequest& req, RouteDecision d) const
{
    std::vector<PlacedNeighbor> around;
    for (const auto& l : req.links) {
        if (usable(l) && !blockedFor(l.neighbor, req, {}, d.newRecords))
            around.push_back({l.neighbor, l.position});
    }
    if (around.empty())
        return deadEnd(req, std::move(d));

    const double reference = req.arrivedFrom ? bearing(req.selfPos, req.locate(*req.arrivedFrom))
                                             : bearing(req.selfPos, req.dstPos);
    d.action = RouteAction::Forward;
    d.mode = ForwardMode::Recovery;
    d.nextHop = *counterclockwiseFrom(req.selfPos, reference, around);
    return d;
}

RouteDecision GpsrqNode::deadEnd(const RoutingRequest& req, RouteDecision d) const
{
    if (req.isSource || !req.returnTo) {
        d.action = RouteAction::Discard;
        return d;
    }
    const auto* back = findLink(req.links, *req.returnTo);
    if (!back || !back->admissible) {
        d.action = RouteAction::Wait;
        d.newRecords.clear();
        return d;
    }
    d.action = RouteAction::Return;
    d.mode = ForwardMode::Returned;
    d.nextHop = *req.returnTo;
    d.fields.loop = 1;
    d.fields.inRecovery = false;
    d.fields.recPosition = m_id;
    return d;
}

void GpsrqNode::commit(const RouteDecision& d)
{
    if (d.action == RouteAction::Wait || !m_cfg.cacheEnabled)
        return;
    for (const auto& r : d.newRecords)
        m_cache.insert(r);
}

} // namespace qkdnet
