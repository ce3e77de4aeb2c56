#include "qkdnet/packet.hpp"

#include <cmath>
#include <string>

namespace qkdnet {

namespace {

class BitWriter {
public:
    explicit BitWriter(std::span<std::uint8_t> out) : m_out(out) {}

    void put(std::uint64_t value, unsigned width, const char* field)
    {
        if (width < 64 && (value >> width) != 0)
            throw HeaderError(std::string("field '") + field + "' does not fit in " + std::to_string(width) + " bits");
        for (unsigned i = width; i-- > 0;) {
            const std::size_t byte = m_pos / 8;
            const unsigned shift = 7 - static_cast<unsigned>(m_pos % 8);
            if ((value >> i) & 1U)
                m_out[byte] = static_cast<std::uint8_t>(m_out[byte] | (1U << shift));
            ++m_pos;
        }
    }

private:
    std::span<std::uint8_t> m_out;
    std::size_t m_pos = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> in) : m_in(in) {}

    std::uint64_t get(unsigned width)
    {
        std::uint64_t v = 0;
        for (unsigned i = 0; i < width; ++i) {
            const std::size_t byte = m_pos / 8;
            const unsigned shift = 7 - static_cast<unsigned>(m_pos % 8);
            v = (v << 1) | ((m_in[byte] >> shift) & 1U);
            ++m_pos;
        }
        return v;
    }

private:
    std::span<const std::uint8_t> m_in;
    std::size_t m_pos = 0;
};

} // namespace

HeaderBytes serializeHeaders(const QkdHeader& h, const QkdCommandHeader& c)
{
    if (h.r > 1)
        throw HeaderError("inRec indicator must be 0 or 1");
    if (h.l > 2)
        throw HeaderError("loop indicator must be 0, 1 or 2");

    HeaderBytes out{};
    BitWriter w(out);
    w.put(h.length, 32, "length");
    w.put(h.messageId, 32, "message id");
    w.put(h.e, 4, "e");
    w.put(h.a, 4, "a");
    w.put(h.z, 2, "z");
    w.put(h.v, 2, "v");
    w.put(h.r, 2, "r");
    w.put(h.l, 2, "l");
    w.put(h.channel, 16, "channel");
    w.put(h.maxDelay, 16, "max delay");
    w.put(h.timestamp, 16, "timestamp");
    w.put(h.encryptionKeyId, 32, "encryption key id");
    w.put(h.authenticationKeyId, 32, "authentication key id");
    w.put(h.authenticationTag, 32, "authentication tag");
    w.put(c.protocol, 16, "protocol");
    w.put(c.command, 16, "command");
    w.put(c.recIf, 16, "recIf");
    w.put(c.recPosition, 16, "recPosition");
    return out;
}

std::pair<QkdHeader, QkdCommandHeader> deserializeHeaders(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kHeaderOverheadBytes)
        throw HeaderError("truncated header: " + std::to_string(bytes.size()) + " bytes");
    BitReader r(bytes);
    QkdHeader h;
    QkdCommandHeader c;
    h.length = static_cast<std::uint32_t>(r.get(32));
    h.messageId = static_cast<std::uint32_t>(r.get(32));
    h.e = static_cast<std::uint8_t>(r.get(4));
    h.a = static_cast<std::uint8_t>(r.get(4));
    h.z = static_cast<std::uint8_t>(r.get(2));
    h.v = static_cast<std::uint8_t>(r.get(2));
    h.r = static_cast<std::uint8_t>(r.get(2));
    h.l = static_cast<std::uint8_t>(r.get(2));
    h.channel = static_cast<std::uint16_t>(r.get(16));
    h.maxDelay = static_cast<std::uint16_t>(r.get(16));
    h.timestamp = static_cast<std::uint16_t>(r.get(16));
    h.encryptionKeyId = static_cast<std::uint32_t>(r.get(32));
    h.authenticationKeyId = static_cast<std::uint32_t>(r.get(32));
    h.authenticationTag = static_cast<std::uint32_t>(r.get(32));
    c.protocol = static_cast<std::uint16_t>(r.get(16));
    c.command = static_cast<std::uint16_t>(r.get(16));
    c.recIf = static_cast<std::uint16_t>(r.get(16));
    c.recPosition = static_cast<std::uint16_t>(r.get(16));
    if (h.r > 1 || h.l > 2)
        throw HeaderError("invalid GPSRQ indicator bits");
    return {h, c};
}

std::uint16_t encodeMillis(double seconds) noexcept
{
    const auto ms = static_cast<std::uint64_t>(std::llround(seconds * 1000.0));
    return static_cast<std::uint16_t>(ms & 0xFFFFU);
}

std::int32_t elapsedMillis(std::uint16_t nowMs, std::uint16_t stampMs) noexcept
{
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(nowMs - stampMs));
}

GpsrqFields readGpsrqFields(const QkdHeader& h, const QkdCommandHeader& c)
{
    return GpsrqFields{h.r == 1, h.l, c.recIf, c.recPosition};
}

void writeGpsrqFields(const GpsrqFields& f, QkdHeader& h, QkdCommandHeader& c)
{
    if (f.loop > 2)
        throw HeaderError("loop indicator must be 0, 1 or 2");
    if (f.recIf > 0xFFFF || f.recPosition > 0xFFFF)
        throw HeaderError("node id does not fit the 16-bit recovery fields");
    h.r = f.inRecovery ? 1 : 0;
    h.l = f.loop;
    c.recIf = static_cast<std::uint16_t>(f.recIf);
    c.recPosition = static_cast<std::uint16_t>(f.recPosition);
}

} // namespace qkdnet
