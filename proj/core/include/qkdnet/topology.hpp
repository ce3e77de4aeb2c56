#pragma once

#include "qkdnet/geometry.hpp"
#include "qkdnet/random.hpp"

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkdnet {

class TopologyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Undirected edge, stored with u < v.
struct Edge {
    NodeId u;
    NodeId v;

    Edge(NodeId a, NodeId b) : u(a < b ? a : b), v(a < b ? b : a) {}

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

class Topology {
public:
    Topology() = default;
    explicit Topology(double gridSize) : m_gridSize(gridSize) {}

    void addNode(NodeId id, Position p);
    /// Throws TopologyError on self-loops or unknown endpoints; duplicates are ignored.
    void addEdge(NodeId a, NodeId b);
    void removeEdge(NodeId a, NodeId b);

    bool hasNode(NodeId id) const { return m_index.contains(id); }
    bool hasEdge(NodeId a, NodeId b) const { return a != b && m_edges.contains(Edge(a, b)); }
    Position position(NodeId id) const;

    /// Neighbor ids in ascending order.
    std::vector<NodeId> neighbors(NodeId id) const;

    const std::vector<std::pair<NodeId, Position>>& nodes() const { return m_nodes; }
    const std::set<Edge>& edges() const { return m_edges; }
    std::size_t nodeCount() const { return m_nodes.size(); }
    std::size_t edgeCount() const { return m_edges.size(); }
    double gridSize() const { return m_gridSize; }

    bool isConnected() const;
    /// Ids are exactly 0..n-1 in declaration order (required by the simulator).
    bool hasDenseIds() const;

    friend bool operator==(const Topology& a, const Topology& b)
    {
        return a.m_gridSize == b.m_gridSize && a.m_nodes == b.m_nodes && a.m_edges == b.m_edges;
    }

private:
    double m_gridSize = 0.0;
    std::vector<std::pair<NodeId, Position>> m_nodes;
    std::map<NodeId, std::size_t> m_index;
    std::set<Edge> m_edges;
};

struct WaxmanConfig {
    double theta = 0.4;       // probability scale
    double omega = 0.4;       // distance decay scale
    double lambdaMax = 0.0;   // maximum inter-node distance; 0 selects the grid diagonal
    int m = 2;                // undirected links placed per new node
    int nodeCount = 10;
    double gridSize = 100.0;
    std::uint64_t seed = 1;

    void validate() const;
    double effectiveLambda() const;
};

double waxmanEdgeProbability(double distance, const WaxmanConfig& cfg);

/// One Bernoulli draw against waxmanEdgeProbability.
bool waxmanAccept(Rng& rng, double distance, const WaxmanConfig& cfg);

struct GeneratedTopology {
    Topology topology;
    int retries = 0;   // regenerations needed to obtain a connected graph
};

inline constexpr int kMaxTopologyRetries = 100;

/// Incremental Waxman construction. Each retry draws from a fresh seed derived
/// from cfg.seed; throws TopologyError if no connected graph appears within
/// kMaxTopologyRetries attempts. With `planarize`, links are only placed
/// between pairs that pass the Gabriel test, so the result is a connected
/// subgraph of the Gabriel graph.
GeneratedTopology generateWaxman(const WaxmanConfig& cfg, bool planarize = false);

/// Keeps (u,v) only if no other node lies strictly inside the circle with diameter uv.
Topology gabrielize(const Topology& t);

/// Right-hand rule over the topology: next neighbor of `at` counterclockwise
/// from `referenceAngle`. Throws TopologyError if `at` has no neighbors.
NodeId counterclockwiseNextEdge(NodeId at, double referenceAngle, const Topology& t);

/// Line format: `topology v1 <nodes> <edges> <grid>`, `N <id> <x> <y>`, `E <u> <v>`.
void writeTopology(std::ostream& os, const Topology& t);
Topology readTopology(std::istream& is);
std::string toText(const Topology& t);

} // namespace qkdnet
