#include "qkdnet/dv_routing.hpp"

namespace qkdnet {

DvRoutingTable::DvRoutingTable(NodeId self)
    : m_self(self)
{
}

std::vector<DvAdvert> DvRoutingTable::periodicDump()
{
    m_ownSeq += 2;
    m_ownChanged = false;
    std::vector<DvAdvert> out;
    out.reserve(m_routes.size() + 1);
    out.push_back({m_self, 0, m_ownSeq});
    for (auto& [dst, r] : m_routes) {
        out.push_back({dst, r.metric, r.seq});
        r.changed = false;
    }
    return out;
}

std::vector<DvAdvert> DvRoutingTable::changedDump()
{
    std::vector<DvAdvert> out;
    if (m_ownChanged)
        out.push_back({m_self, 0, m_ownSeq});
    m_ownChanged = false;
    for (auto& [dst, r] : m_routes) {
        if (!r.changed)
            continue;
        out.push_back({dst, r.metric, r.seq});
        r.changed = false;
    }
    return out;
}

std::vector<DvAdvert> DvRoutingTable::fullDump() const
{
    std::vector<DvAdvert> out;
    out.reserve(m_routes.size() + 1);
    out.push_back({m_self, 0, m_ownSeq});
    for (const auto& [dst, r] : m_routes)
        out.push_back({dst, r.metric, r.seq});
    return out;
}

bool DvRoutingTable::hasChanges() const
{
    if (m_ownChanged)
        return true;
    for (const auto& [dst, r] : m_routes)
        if (r.changed)
            return true;
    return false;
}

bool DvRoutingTable::applyAdvert(NodeId from, std::span<const DvAdvert> entries)
{
    bool any = false;
    for (const DvAdvert& e : entries) {
        if (e.dst == m_self) {
            // someone advertises a break towards us; supersede it
            if (e.seq > m_ownSeq) {
                m_ownSeq = e.seq + (e.seq % 2 == 1 ? 1 : 2);
                m_ownChanged = true;
                any = true;
            }
            continue;
        }
        const std::uint32_t metric = e.metric >= kDvInfinity ? kDvInfinity : e.metric + 1;
        auto it = m_routes.find(e.dst);
        if (it == m_routes.end()) {
            if (metric >= kDvInfinity)
                continue;
            m_routes.emplace(e.dst, DvRoute{from, metric, e.seq, true});
            any = true;
            continue;
        }
        DvRoute& r = it->second;
        const bool newer = e.seq > r.seq;
        const bool shorter = e.seq == r.seq && metric < r.metric;
        if (!newer && !shorter)
            continue;
        const bool material = r.nextHop != from || r.metric != metric;
        r.nextHop = from;
        r.metric = metric;
        r.seq = e.seq;
        if (material) {
            r.changed = true;
            any = true;
        }
    }
    return any;
}

bool DvRoutingTable::linkDown(NodeId neighbor)
{
    bool any = false;
    for (auto& [dst, r] : m_routes) {
        if (r.nextHop != neighbor || r.metric >= kDvInfinity)
            continue;
        r.metric = kDvInfinity;
        r.seq += 1;
        r.changed = true;
        any = true;
    }
    return any;
}

void DvRoutingTable::linkUp()
{
    m_ownSeq += 2;
    m_ownChanged = true;
}

std::optional<NodeId> DvRoutingTable::nextHop(NodeId dst) const
{
    const DvRoute* r = route(dst);
    if (!r || r->metric >= kDvInfinity)
        return std::nullopt;
    return r->nextHop;
}

const DvRoute* DvRoutingTable::route(NodeId dst) const
{
    auto it = m_routes.find(dst);
    return it == m_routes.end() ? nullptr : &it->second;
}

} // namespace qkdnet
