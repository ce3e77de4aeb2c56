#include "qkdnet/key_storage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace qkdnet {

const char* toString(TrafficClass c) noexcept
{
    switch (c) {
    case TrafficClass::BestEffort: return "best-effort";
    case TrafficClass::RealTime: return "real-time";
    case TrafficClass::Premium: return "premium";
    }
    return "?";
}

KeyStorage::KeyStorage(Bits minBits, Bits currentBits, Bits maxBits, double rateBps, double chargePeriod)
    : m_min(minBits), m_cur(currentBits), m_max(maxBits), m_thr(maxBits), m_rate(rateBps), m_period(chargePeriod)
{
    if (!(m_min > 0 && m_min < m_max))
        throw std::invalid_argument("key storage needs 0 < M_min < M_max");
    if (m_cur < 0 || m_cur > m_max)
        throw std::invalid_argument("key storage needs 0 <= M_cur <= M_max");
    if (!(m_rate > 0.0) || !(m_period > 0.0))
        throw std::invalid_argument("charging rate and period must be positive");
}

void KeyStorage::setThreshold(Bits thr)
{
    m_thr = std::clamp<Bits>(thr, 0, m_max);
}

Bits KeyStorage::charge()
{
    const auto burst = static_cast<Bits>(std::llround(m_rate * m_period));
    const Bits stored = std::min(burst, m_max - m_cur);
    m_cur += stored;
    return stored;
}

bool KeyStorage::canConsume(Bits keyBits, TrafficClass cls) const
{
    if (keyBits <= 0)
        return false;
    if (cls == TrafficClass::Premium)
        return m_cur >= keyBits;
    return m_cur > m_min && m_cur - keyBits >= m_min;
}

bool KeyStorage::consume(Bits keyBits, TrafficClass cls)
{
    if (!canConsume(keyBits, cls))
        return false;
    m_cur -= keyBits;
    return true;
}

double KeyStorage::maxDeliverable(double horizon, TrafficClass cls) const
{
    const double reserve = cls == TrafficClass::Premium ? 0.0 : static_cast<double>(m_min);
    return std::max(0.0, m_rate * horizon + static_cast<double>(m_cur) - reserve);
}

double KeyStorage::maxPayload(double horizon, TrafficClass cls, double keyRatio) const
{
    return maxDeliverable(horizon, cls) / keyRatio;
}

PublicChannelStats::PublicChannelStats(std::size_t windowLen, double initialAverage)
    : m_windowLen(windowLen), m_last(initialAverage), m_average(initialAverage)
{
    if (windowLen == 0)
        throw std::invalid_argument("T_average window must hold at least one sample");
    if (!(initialAverage > 0.0))
        throw std::invalid_argument("initial T_average must be positive");
}

void PublicChannelStats::recordKeyRound(double duration, double now)
{
    if (!(duration > 0.0))
        throw std::invalid_argument("key round duration must be positive");
    m_samples.push_back(duration);
    if (m_samples.size() > m_windowLen)
        m_samples.pop_front();
    m_last = duration;
    m_lastAt = now;
    m_average = std::accumulate(m_samples.begin(), m_samples.end(), 0.0) / static_cast<double>(m_samples.size());
}

double RoundDurationModel::sample(Rng& rng, double occupancy) const
{
    std::normal_distribution<double> dist(mean, stddevFraction * mean);
    const double base = std::max(floor, dist(rng));
    return base * (1.0 + loadCoupling * std::clamp(occupancy, 0.0, 1.0));
}

Bits KeyCostModel::cost(std::size_t payloadBytes) const
{
    const auto payloadBits = static_cast<Bits>(payloadBytes) * 8;
    if (cipher == Cipher::Otp)
        return payloadBits + authKeyBits;
    const Bits refresh = std::max(1, aesRefreshPackets);
    return (aesKeyBits + refresh - 1) / refresh + authKeyBits;
}

double KeyCostModel::ratio(std::size_t payloadBytes) const
{
    return static_cast<double>(cost(payloadBytes)) / (static_cast<double>(payloadBytes) * 8.0);
}

} // namespace qkdnet
