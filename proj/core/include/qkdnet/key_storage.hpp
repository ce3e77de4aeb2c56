#pragma once

#include "qkdnet/geometry.hpp"
#include "qkdnet/random.hpp"

#include <cstdint>
#include <deque>
#include <stdexcept>

namespace qkdnet {

using Bits = std::int64_t;

/// DSCP code points: BestEffort=0, RealTime=46 (EF), Premium=56 (CS7).
enum class TrafficClass : std::uint8_t { BestEffort = 0, RealTime = 1, Premium = 2 };

inline constexpr int kTrafficClassCount = 3;

constexpr std::uint8_t dscp(TrafficClass c) noexcept
{
    switch (c) {
    case TrafficClass::BestEffort: return 0;
    case TrafficClass::RealTime: return 46;
    case TrafficClass::Premium: return 56;
    }
    return 0;
}

const char* toString(TrafficClass c) noexcept;

constexpr Bits bytesToBits(double bytes) noexcept { return static_cast<Bits>(bytes * 8.0); }

/// Token-bucket view of the key material shared by the two ends of a QKD link.
/// All quantities are in bits.
class KeyStorage {
public:
    KeyStorage() = default;
    KeyStorage(Bits minBits, Bits currentBits, Bits maxBits, double rateBps, double chargePeriod);

    Bits minimum() const { return m_min; }
    Bits current() const { return m_cur; }
    Bits maximum() const { return m_max; }
    Bits threshold() const { return m_thr; }
    double rate() const { return m_rate; }
    double chargePeriod() const { return m_period; }

    void setThreshold(Bits thr);

    /// Adds rate * period bits, discarding anything above the capacity.
    /// Returns the bits actually stored.
    Bits charge();

    /// Reserve rule: Premium may draw the storage down to zero; the other
    /// classes need M_cur > M_min before and M_cur - k >= M_min after.
    bool canConsume(Bits keyBits, TrafficClass cls) const;
    bool consume(Bits keyBits, TrafficClass cls);

    /// Key bits that can be handed out over a horizon of `horizon` seconds:
    /// r*T + M_cur - M_min (the reserve term is dropped for Premium), floored at 0.
    double maxDeliverable(double horizon, TrafficClass cls) const;

    /// Payload bits deliverable over the horizon for a flow with key ratio L.
    double maxPayload(double horizon, TrafficClass cls, double keyRatio) const;

private:
    Bits m_min = 0;
    Bits m_cur = 0;
    Bits m_max = 1;
    Bits m_thr = 1;
    double m_rate = 1.0;
    double m_period = 1.0;
};

/// Timing history of the key-establishment rounds on a link's public channel.
class PublicChannelStats {
public:
    /// `initialAverage` seeds T_average until the first round is recorded.
    PublicChannelStats(std::size_t windowLen, double initialAverage);

    void recordKeyRound(double duration, double now);

    double lastDuration() const { return m_last; }
    double lastRecordedAt() const { return m_lastAt; }
    double average() const { return m_average; }
    double maximal() const { return 2.0 * m_average; }
    std::size_t windowLength() const { return m_windowLen; }
    const std::deque<double>& samples() const { return m_samples; }

private:
    std::size_t m_windowLen;
    std::deque<double> m_samples;
    double m_last;
    double m_lastAt = 0.0;
    double m_average;
};

/// Samples key-establishment round durations: normal(mean, fraction*mean)
/// floored at `floor`, optionally stretched by load on the public channel.
struct RoundDurationModel {
    double mean = 7.0;
    double stddevFraction = 0.1;
    double floor = 0.1;
    double loadCoupling = 0.0;   // duration *= 1 + loadCoupling * occupancy

    double sample(Rng& rng, double occupancy = 0.0) const;
};

enum class Cipher : std::uint8_t { Otp, Aes };

/// Per-packet key cost. OTP spends one key bit per payload bit; AES spends a
/// session key amortised over `aesRefreshPackets` packets. Every packet also
/// spends `authKeyBits` for its authentication tag.
struct KeyCostModel {
    Cipher cipher = Cipher::Otp;
    Bits authKeyBits = 256;
    Bits aesKeyBits = 256;
    int aesRefreshPackets = 100;

    Bits cost(std::size_t payloadBytes) const;
    /// Key bits per payload bit (L_k).
    double ratio(std::size_t payloadBytes) const;
};

struct QkdLink {
    NodeId a = 0;
    NodeId b = 0;
    KeyStorage storage;
    PublicChannelStats stats{5, 7.0};
    double bandwidthBps = 10e6;
    bool publicChannelUp = true;

    // Accounting for the conservation check.
    Bits initialBits = 0;
    Bits chargedBits = 0;
    Bits consumedBits = 0;

    NodeId peer(NodeId self) const { return self == a ? b : a; }
    bool touches(NodeId n) const { return n == a || n == b; }

    bool conservationHolds() const
    {
        return initialBits + chargedBits == storage.current() + consumedBits;
    }
};

} // namespace qkdnet
