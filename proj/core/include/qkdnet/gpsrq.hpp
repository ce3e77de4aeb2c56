#pragma once

#include "qkdnet/geometry.hpp"
#include "qkdnet/key_storage.hpp"
#include "qkdnet/packet.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qkdnet {

/// "Do not route via `via` toward any destination inside circle(center, radius)".
struct CacheRecord {
    NodeId via = 0;
    Position center;
    double radius = 0.0;
    double expiresAt = 0.0;

    bool covers(NodeId neighbor, Position dst, double now) const
    {
        return neighbor == via && now < expiresAt && euclideanDistance(center, dst) <= radius;
    }
};

class RouteCache {
public:
    void insert(const CacheRecord& r);
    bool blocked(NodeId via, Position dst, double now) const;
    void purgeExpired(double now);

    const std::vector<CacheRecord>& records() const { return m_records; }
    std::size_t size() const { return m_records.size(); }

    /// `CACHE <node> <via> <cx> <cy> <radius> <expires_at>` per live record.
    std::vector<std::string> dump(NodeId owner, double now) const;

private:
    std::vector<CacheRecord> m_records;
};

/// Validity of a cache record: half of T_maximal, i.e. T_average of the link.
inline double cacheTtl(const PublicChannelStats& stats) { return stats.maximal() / 2.0; }

struct GpsrqConfig {
    double beta = 0.6;
    double alpha = 0.5;
    bool cacheEnabled = true;
};

/// What the forwarding node knows about one adjacent link at decision time.
struct CandidateLink {
    NodeId neighbor = 0;
    Position position;
    bool admissible = false;   // admission control would accept this packet
    double publicMetric = 0.0;
    double routeMetric = 0.0;  // R_m seen from this node
    double cacheTtl = 0.0;
};

struct RoutingRequest {
    NodeId self = 0;
    Position selfPos;
    NodeId dst = 0;
    Position dstPos;
    bool isSource = false;
    std::optional<NodeId> arrivedFrom;
    std::optional<NodeId> returnTo;   // predecessor on the loop-erased path
    bool delayExpired = false;
    double now = 0.0;
    GpsrqFields fields;
    std::span<const CandidateLink> links;
    std::function<Position(NodeId)> locate;   // location service
};

enum class RouteAction { Forward, Return, Wait, Discard };

enum class ForwardMode { Direct, Greedy, RecoveryEntry, Recovery, Returned };

struct RouteDecision {
    RouteAction action = RouteAction::Wait;
    ForwardMode mode = ForwardMode::Greedy;
    NodeId nextHop = 0;
    GpsrqFields fields;
    std::vector<CacheRecord> newRecords;
    bool loopDetected = false;
    bool delayReturn = false;
};

const char* toString(RouteAction a) noexcept;
const char* toString(ForwardMode m) noexcept;

/// Per-node GPSRQ state: configuration, exclusion cache and the threshold
/// values learned from neighbors.
class GpsrqNode {
public:
    GpsrqNode(NodeId id, Position pos, GpsrqConfig cfg) : m_id(id), m_pos(pos), m_cfg(cfg) {}

    NodeId id() const { return m_id; }
    Position position() const { return m_pos; }
    const GpsrqConfig& config() const { return m_cfg; }

    /// Pure with respect to node and packet state; apply the outcome with commit().
    RouteDecision decide(const RoutingRequest& req) const;
    void commit(const RouteDecision& d);

    /// argmin over eligible neighbors of (1-beta)*R + beta*G, G being the
    /// neighbor's distance to the destination scaled by the largest such
    /// distance among the eligible set. With beta > 0 only neighbors strictly
    /// closer to the destination than this node are eligible.
    std::optional<NodeId> greedyNextHop(const RoutingRequest& req, std::span<const NodeId> exclude,
                                        std::span<const CacheRecord> pending = {}) const;

    bool cacheBlocked(NodeId via, Position dst, double now) const { return m_cache.blocked(via, dst, now); }
    RouteCache& cache() { return m_cache; }
    const RouteCache& cache() const { return m_cache; }

    void recordAdvertisedMean(double mean) { m_advertised = mean; }
    void recordNeighborMean(NodeId neighbor, double mean) { m_neighborMeans[neighbor] = mean; }
    /// min(own advertised mean, neighbor's mean) once both are known.
    std::optional<double> threshold(NodeId neighbor) const;

private:
    bool blockedFor(NodeId via, const RoutingRequest& req, std::span<const NodeId> exclude,
                    std::span<const CacheRecord> pending) const;
    RouteDecision routeFresh(const RoutingRequest& req, RouteDecision d, std::vector<NodeId> exclude) const;
    RouteDecision recoveryStep(const RoutingRequest& req, RouteDecision d) const;
    RouteDecision deadEnd(const RoutingRequest& req, RouteDecision d) const;

    NodeId m_id;
    Position m_pos;
    GpsrqConfig m_cfg;
    RouteCache m_cache;
    std::optional<double> m_advertised;
    std::map<NodeId, double> m_neighborMeans;
};

} // namespace qkdnet
