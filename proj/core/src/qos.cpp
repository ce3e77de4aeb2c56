#include "qkdnet/qos.hpp"

namespace qkdnet {

Classification classify(AppTag tag, TrafficClass configured)
{
    TrafficClass cls = TrafficClass::BestEffort;
    switch (tag) {
    case AppTag::PostProcessing:
    case AppTag::Signaling:
        cls = TrafficClass::Premium;
        break;
    case AppTag::UserFlow:
        cls = configured == TrafficClass::Premium ? TrafficClass::BestEffort : configured;
        break;
    case AppTag::Untagged:
        break;
    }
    return {cls, dscp(cls)};
}

bool PriorityQueueSet::enqueue(TrafficClass cls, PacketId id)
{
    auto& q = m_queues[index(cls)];
    if (q.size() >= m_capacity) {
        ++m_drops[index(cls)];
        return false;
    }
    q.push_back(id);
    return true;
}

std::optional<PriorityQueueSet::Head> PriorityQueueSet::front() const
{
    for (int c = kTrafficClassCount - 1; c >= 0; --c) {
        const auto& q = m_queues[static_cast<std::size_t>(c)];
        if (!q.empty())
            return Head{static_cast<TrafficClass>(c), q.front()};
    }
    return std::nullopt;
}

std::optional<PriorityQueueSet::Head> PriorityQueueSet::dequeue()
{
    auto head = front();
    if (head) {
        m_queues[index(head->cls)].pop_front();
        ++m_served[index(head->cls)];
    }
    return head;
}

std::size_t PriorityQueueSet::totalSize() const
{
    std::size_t n = 0;
    for (const auto& q : m_queues)
        n += q.size();
    return n;
}

std::optional<Bits> admit(const QkdLink& link, const SimPacket& pkt, const KeyCostModel& costModel)
{
    if (!link.publicChannelUp)
        return std::nullopt;
    const Bits cost = costModel.cost(pkt.payloadLen);
    if (!link.storage.canConsume(cost, pkt.cls))
        return std::nullopt;
    return cost;
}

} // namespace qkdnet
