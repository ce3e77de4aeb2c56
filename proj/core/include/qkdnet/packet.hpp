#pragma once

#include "qkdnet/geometry.hpp"
#include "qkdnet/key_storage.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace qkdnet {

class HeaderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kQkdHeaderBytes = 28;
inline constexpr std::size_t kCommandHeaderBytes = 8;
inline constexpr std::size_t kHeaderOverheadBytes = kQkdHeaderBytes + kCommandHeaderBytes;

/// QKD header with the GPSRQ r (inRec) and l (loop) bits. Narrow fields are
/// held in wider integers; serializeHeader rejects out-of-range values.
struct QkdHeader {
    std::uint32_t length = 0;
    std::uint32_t messageId = 0;
    std::uint8_t e = 0;   // 4 bits, cipher
    std::uint8_t a = 0;   // 4 bits, authentication
    std::uint8_t z = 0;   // 2 bits, compression
    std::uint8_t v = 0;   // 2 bits, version
    std::uint8_t r = 0;   // 2 bits, GPSRQ inRec
    std::uint8_t l = 0;   // 2 bits, GPSRQ loop
    std::uint16_t channel = 0;
    std::uint16_t maxDelay = 0;    // ms
    std::uint16_t timestamp = 0;   // ms modulo 2^16
    std::uint32_t encryptionKeyId = 0;
    std::uint32_t authenticationKeyId = 0;
    std::uint32_t authenticationTag = 0;

    friend bool operator==(const QkdHeader&, const QkdHeader&) = default;
};

struct QkdCommandHeader {
    std::uint16_t protocol = 0;
    std::uint16_t command = 0;
    std::uint16_t recIf = 0;
    std::uint16_t recPosition = 0;

    friend bool operator==(const QkdCommandHeader&, const QkdCommandHeader&) = default;
};

using HeaderBytes = std::array<std::uint8_t, kHeaderOverheadBytes>;

/// Big-endian, MSB-first layout; see docs/header_layout.md for bit offsets.
HeaderBytes serializeHeaders(const QkdHeader& h, const QkdCommandHeader& c);
std::pair<QkdHeader, QkdCommandHeader> deserializeHeaders(std::span<const std::uint8_t> bytes);

/// Values used in the e/a/v fields and the command header.
namespace wire {
inline constexpr std::uint8_t kCipherNone = 0;
inline constexpr std::uint8_t kCipherOtp = 1;
inline constexpr std::uint8_t kCipherAes = 2;
inline constexpr std::uint8_t kAuthVmac = 1;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint16_t kProtocolData = 0x11;
inline constexpr std::uint16_t kProtocolGpsrq = 0x0100;
inline constexpr std::uint16_t kProtocolDv = 0x0101;
inline constexpr std::uint16_t kCommandNone = 0;
inline constexpr std::uint16_t kCommandThreshold = 7;
inline constexpr std::uint16_t kCommandDvUpdate = 8;
} // namespace wire

/// Timestamps travel as milliseconds modulo 2^16.
std::uint16_t encodeMillis(double seconds) noexcept;
/// Signed age in ms of a 16-bit timestamp; valid within a +/-32 s horizon.
std::int32_t elapsedMillis(std::uint16_t nowMs, std::uint16_t stampMs) noexcept;

/// GPSRQ view of the header fields, as moved in and out of the QKD headers.
struct GpsrqFields {
    bool inRecovery = false;
    std::uint8_t loop = 0;   // 0 never looped, 1 being returned, 2 loop resolved
    NodeId recIf = 0;        // neighbor used for the first recovery hop
    NodeId recPosition = 0;  // recovery start, or the node that returned the packet

    friend bool operator==(const GpsrqFields&, const GpsrqFields&) = default;
};

GpsrqFields readGpsrqFields(const QkdHeader& h, const QkdCommandHeader& c);
void writeGpsrqFields(const GpsrqFields& f, QkdHeader& h, QkdCommandHeader& c);

enum class PacketKind : std::uint8_t { Data, Threshold, DvUpdate };

/// Application tag seen by the classifier.
enum class AppTag : std::uint8_t { Untagged, UserFlow, PostProcessing, Signaling };

using PacketId = std::uint32_t;

struct SimPacket {
    PacketId id = 0;
    PacketKind kind = PacketKind::Data;
    NodeId src = 0;
    NodeId dst = 0;
    TrafficClass cls = TrafficClass::BestEffort;
    std::size_t payloadLen = 0;   // bytes
    double createdAt = 0.0;
    double maxDelay = 0.0;
    QkdHeader qkd;
    QkdCommandHeader cmd;
    std::uint32_t hopCount = 0;

    // Simulation bookkeeping, not carried on the wire.
    std::vector<NodeId> trail;            // loop-erased path from the source
    std::optional<NodeId> arrivedFrom;
    std::optional<NodeId> fixedNextHop;   // link-local signaling
    double signalingValue = 0.0;
    bool everReturned = false;
    bool everLoop2 = false;

    std::size_t wireBytes() const { return payloadLen + kHeaderOverheadBytes; }
};

} // namespace qkdnet
