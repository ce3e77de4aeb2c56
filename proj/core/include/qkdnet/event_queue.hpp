#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <vector>

namespace qkdnet {

enum class EventKind : std::uint8_t {
    PacketArrival,
    LinkTransmitDone,
    KeyCharge,
    SignalingTimer,
    DvTimer,
    RetryTimer,
    CacheExpiry,
    SimulationEnd,
};

struct SimEvent {
    double fireAt = 0.0;
    std::uint64_t sequence = 0;
    EventKind kind = EventKind::SimulationEnd;
    std::uint32_t a = 0;   // kind-specific: node, link or packet
    std::uint32_t b = 0;
    std::uint32_t c = 0;
};

/// Time-ordered event set. Events with equal fire times pop in the order
/// they were scheduled.
class EventQueue {
public:
    double now() const { return m_now; }
    bool empty() const { return m_heap.empty(); }
    std::size_t size() const { return m_heap.size(); }

    void schedule(double at, EventKind kind, std::uint32_t a = 0, std::uint32_t b = 0, std::uint32_t c = 0)
    {
        if (at < m_now)
            throw std::logic_error("event scheduled in the past");
        m_heap.push(SimEvent{at, m_nextSeq++, kind, a, b, c});
    }

    SimEvent pop()
    {
        SimEvent e = m_heap.top();
        m_heap.pop();
        m_now = e.fireAt;
        return e;
    }

private:
    struct Later {
        bool operator()(const SimEvent& x, const SimEvent& y) const
        {
            if (x.fireAt != y.fireAt)
                return x.fireAt > y.fireAt;
            return x.sequence > y.sequence;
        }
    };

    std::priority_queue<SimEvent, std::vector<SimEvent>, Later> m_heap;
    std::uint64_t m_nextSeq = 0;
    double m_now = 0.0;
};

} // namespace qkdnet
