#pragma once

#include "qkdnet/geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace qkdnet {

inline constexpr std::uint32_t kDvInfinity = 0xFFFF;

struct DvAdvert {
    NodeId dst;
    std::uint32_t metric;
    std::uint32_t seq;

    friend bool operator==(const DvAdvert&, const DvAdvert&) = default;
};

struct DvRoute {
    NodeId nextHop = 0;
    std::uint32_t metric = kDvInfinity;
    std::uint32_t seq = 0;
    bool changed = false;
};

/// DSDV-style table: hop-count metric, destination-issued sequence numbers
/// (even while the destination is reachable, odd once a break is advertised).
class DvRoutingTable {
public:
    explicit DvRoutingTable(NodeId self);

    NodeId self() const { return m_self; }
    std::uint32_t ownSeq() const { return m_ownSeq; }

    /// Bumps the own sequence number and returns every entry, clearing change flags.
    std::vector<DvAdvert> periodicDump();
    /// Entries changed since the last dump, clearing their flags.
    std::vector<DvAdvert> changedDump();
    /// Every entry as it stands, leaving sequence numbers and flags alone.
    std::vector<DvAdvert> fullDump() const;
    bool hasChanges() const;

    /// Newer sequence always wins; an equal sequence wins with a shorter path.
    /// Returns true if any route changed.
    bool applyAdvert(NodeId from, std::span<const DvAdvert> entries);

    /// Routes through `neighbor` become unreachable with the next odd sequence.
    bool linkDown(NodeId neighbor);
    /// A fresh own sequence so neighbors can replace the broken entry for us.
    void linkUp();

    std::optional<NodeId> nextHop(NodeId dst) const;
    const DvRoute* route(NodeId dst) const;
    const std::map<NodeId, DvRoute>& routes() const { return m_routes; }

private:
    NodeId m_self;
    std::uint32_t m_ownSeq = 0;
    bool m_ownChanged = false;
    std::map<NodeId, DvRoute> m_routes;
};

} // namespace qkdnet
