#pragma once

#include "qkdnet/key_storage.hpp"
#include "qkdnet/packet.hpp"

#include <array>
#include <deque>
#include <optional>

namespace qkdnet {

struct Classification {
    TrafficClass cls;
    std::uint8_t dscp;
};

/// Post-processing and signaling traffic is Premium. User flows get their
/// configured class, except that they may never claim Premium. Anything
/// untagged falls back to BestEffort.
Classification classify(AppTag tag, TrafficClass configured = TrafficClass::BestEffort);

/// One bounded FIFO per traffic class, served in strict priority order.
class PriorityQueueSet {
public:
    explicit PriorityQueueSet(std::size_t capacity = 1000) : m_capacity(capacity) {}

    /// False (and a counted drop) when the class queue is full.
    bool enqueue(TrafficClass cls, PacketId id);

    struct Head {
        TrafficClass cls;
        PacketId id;
    };
    std::optional<Head> front() const;
    std::optional<Head> dequeue();

    std::size_t size(TrafficClass cls) const { return m_queues[index(cls)].size(); }
    std::size_t totalSize() const;
    bool empty() const { return totalSize() == 0; }
    std::size_t capacity() const { return m_capacity; }
    std::uint64_t drops(TrafficClass cls) const { return m_drops[index(cls)]; }
    std::uint64_t served(TrafficClass cls) const { return m_served[index(cls)]; }

private:
    static std::size_t index(TrafficClass c) { return static_cast<std::size_t>(c); }

    std::size_t m_capacity;
    std::array<std::deque<PacketId>, kTrafficClassCount> m_queues;
    std::array<std::uint64_t, kTrafficClassCount> m_drops{};
    std::array<std::uint64_t, kTrafficClassCount> m_served{};
};

/// Admission control: the exact key cost if the link can carry the packet now
/// (public channel up and the storage's reserve rule satisfied), else nullopt.
std::optional<Bits> admit(const QkdLink& link, const SimPacket& pkt, const KeyCostModel& costModel);

} // namespace qkdnet
