#include "qkdnet/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

namespace qkdnet {

void Topology::addNode(NodeId id, Position p)
{
    if (m_index.contains(id))
        throw TopologyError("duplicate node id " + std::to_string(id));
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
        throw TopologyError("non-finite position for node " + std::to_string(id));
    m_index.emplace(id, m_nodes.size());
    m_nodes.emplace_back(id, p);
}

void Topology::addEdge(NodeId a, NodeId b)
{
    if (a == b)
        throw TopologyError("self-loop on node " + std::to_string(a));
    if (!hasNode(a) || !hasNode(b))
        throw TopologyError("edge " + std::to_string(a) + "-" + std::to_string(b) + " references an unknown node");
    m_edges.emplace(a, b);
}

void Topology::removeEdge(NodeId a, NodeId b)
{
    m_edges.erase(Edge(a, b));
}

Position Topology::position(NodeId id) const
{
    auto it = m_index.find(id);
    if (it == m_index.end())
        throw TopologyError("unknown node " + std::to_string(id));
    return m_nodes[it->second].second;
}

std::vector<NodeId> Topology::neighbors(NodeId id) const
{
    std::vector<NodeId> out;
    for (const auto& e : m_edges) {
        if (e.u == id)
            out.push_back(e.v);
        else if (e.v == id)
            out.push_back(e.u);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool Topology::isConnected() const
{
    if (m_nodes.empty())
        return true;
    std::map<NodeId, std::vector<NodeId>> adj;
    for (const auto& e : m_edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    std::set<NodeId> seen{m_nodes.front().first};
    std::queue<NodeId> frontier;
    frontier.push(m_nodes.front().first);
    while (!frontier.empty()) {
        const NodeId cur = frontier.front();
        frontier.pop();
        for (NodeId n : adj[cur]) {
            if (seen.insert(n).second)
                frontier.push(n);
        }
    }
    return seen.size() == m_nodes.size();
}

bool Topology::hasDenseIds() const
{
    for (std::size_t i = 0; i < m_nodes.size(); ++i) {
        if (m_nodes[i].first != i)
            return false;
    }
    return true;
}

void WaxmanConfig::validate() const
{
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("waxman theta must lie in (0,1]");
    if (!(omega > 0.0 && omega <= 1.0))
        throw std::invalid_argument("waxman omega must lie in (0,1]");
    if (lambdaMax < 0.0 || !std::isfinite(lambdaMax))
        throw std::invalid_argument("waxman lambda must be positive");
    if (m < 1)
        throw std::invalid_argument("waxman m must be at least 1");
    if (nodeCount < 2)
        throw std::invalid_argument("waxman node count must be at least 2");
    if (!(gridSize > 0.0) || !std::isfinite(gridSize))
        throw std::invalid_argument("grid size must be positive");
}

double WaxmanConfig::effectiveLambda() const
{
    return lambdaMax > 0.0 ? lambdaMax : gridSize * std::sqrt(2.0);
}

double waxmanEdgeProbability(double distance, const WaxmanConfig& cfg)
{
    return cfg.theta * std::exp(-distance / (cfg.omega * cfg.effectiveLambda()));
}

bool waxmanAccept(Rng& rng, double distance, const WaxmanConfig& cfg)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < waxmanEdgeProbability(distance, cfg);
}

namespace {

bool gabrielEdge(const Topology& t, NodeId u, NodeId v)
{
    const Position pu = t.position(u);
    const Position pv = t.position(v);
    const double duv = squaredDistance(pu, pv);
    for (const auto& [w, pw] : t.nodes()) {
        if (w != u && w != v && squaredDistance(pu, pw) + squaredDistance(pw, pv) < duv)
            return false;
    }
    return true;
}

// With gabrielOnly, partners whose edge would fail the Gabriel test are never
// offered, so every placed link survives planarization.
Topology buildWaxman(const WaxmanConfig& cfg, Rng& rng, bool gabrielOnly)
{
    Topology t(cfg.gridSize);
    std::uniform_real_distribution<double> coord(0.0, cfg.gridSize);
    for (int i = 0; i < cfg.nodeCount; ++i) {
        const double x = coord(rng);
        const double y = coord(rng);
        t.addNode(static_cast<NodeId>(i), Position{x, y});
    }

    for (int i = 1; i < cfg.nodeCount; ++i) {
        const int target = std::min(cfg.m, i);
        const Position here = t.position(static_cast<NodeId>(i));
        std::vector<NodeId> pool;
        for (int j = 0; j < i; ++j)
            if (!gabrielOnly || gabrielEdge(t, static_cast<NodeId>(i), static_cast<NodeId>(j)))
                pool.push_back(static_cast<NodeId>(j));

        int placed = 0;
        const int attemptCap = 1000 * target;
        for (int attempt = 0; attempt < attemptCap && placed < target && !pool.empty(); ++attempt) {
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            const std::size_t k = pick(rng);
            const NodeId cand = pool[k];
            if (waxmanAccept(rng, euclideanDistance(here, t.position(cand)), cfg)) {
                t.addEdge(static_cast<NodeId>(i), cand);
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
                ++placed;
            }
        }
    }
    return t;
}

} // namespace

GeneratedTopology generateWaxman(const WaxmanConfig& cfg, bool planarize)
{
    cfg.validate();
    for (int attempt = 0; attempt < kMaxTopologyRetries; ++attempt) {
        Rng rng(mixSeed(cfg.seed + static_cast<std::uint64_t>(attempt)));
        Topology t = buildWaxman(cfg, rng, planarize);
        if (planarize)
            t = gabrielize(t);
        if (t.isConnected())
            return GeneratedTopology{std::move(t), attempt};
    }
    throw TopologyError("no connected topology within " + std::to_string(kMaxTopologyRetries)
                        + " attempts; configuration is infeasible");
}

Topology gabrielize(const Topology& t)
{
    Topology out(t.gridSize());
    for (const auto& [id, p] : t.nodes())
        out.addNode(id, p);
    for (const auto& e : t.edges()) {
        if (gabrielEdge(t, e.u, e.v))
            out.addEdge(e.u, e.v);
    }
    return out;
}

NodeId counterclockwiseNextEdge(NodeId at, double referenceAngle, const Topology& t)
{
    std::vector<PlacedNeighbor> around;
    for (NodeId n : t.neighbors(at))
        around.push_back({n, t.position(n)});
    auto next = counterclockwiseFrom(t.position(at), referenceAngle, around);
    if (!next)
        throw TopologyError("node " + std::to_string(at) + " has no neighbors");
    return *next;
}

void writeTopology(std::ostream& os, const Topology& t)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "topology v1 %zu %zu %.6f\n", t.nodeCount(), t.edgeCount(), t.gridSize());
    os << buf;
    for (const auto& [id, p] : t.nodes()) {
        std::snprintf(buf, sizeof buf, "N %u %.17g %.17g\n", id, p.x, p.y);
        os << buf;
    }
    for (const auto& e : t.edges())
        os << "E " << e.u << ' ' << e.v << '\n';
}

std::string toText(const Topology& t)
{
    std::ostringstream os;
    writeTopology(os, t);
    return os.str();
}

Topology readTopology(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw TopologyError("empty topology file");
    std::istringstream header(line);
    std::string magic, version;
    std::size_t nodeCount = 0, edgeCount = 0;
    double grid = 0.0;
    if (!(header >> magic >> version >> nodeCount >> edgeCount >> grid) || magic != "topology" || version != "v1")
        throw TopologyError("bad topology header: " + line);

    Topology t(grid);
    std::size_t lineNo = 1;
    std::size_t edgesSeen = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        if (line.empty())
            continue;
        std::istringstream row(line);
        std::string tag;
        row >> tag;
        if (tag == "N") {
            NodeId id;
            Position p;
            if (!(row >> id >> p.x >> p.y))
                throw TopologyError("bad node line " + std::to_string(lineNo));
            t.addNode(id, p);
        } else if (tag == "E") {
            NodeId a, b;
            if (!(row >> a >> b))
                throw TopologyError("bad edge line " + std::to_string(lineNo));
            t.addEdge(a, b);
            ++edgesSeen;
        } else {
            throw TopologyError("unknown record '" + tag + "' on line " + std::to_string(lineNo));
        }
    }
    if (t.nodeCount() != nodeCount || edgesSeen != edgeCount)
        throw TopologyError("topology counts do not match header");
    return t;
}

} // namespace qkdnet
