#pragma once

#include "qkdnet/simulator.hpp"
#include "qkdnet/topology.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qkdnet {

/// A sweep: the base run configuration plus lists whose cartesian product
/// yields the individual runs. Topologies are Waxman graphs drawn per
/// (nodes, seed) and optionally reduced to their Gabriel subgraph.
struct ExperimentConfig {
    SimulationConfig base;
    WaxmanConfig waxman;   // nodeCount and seed are overridden per run
    bool gabriel = true;

    std::vector<Protocol> protocols{Protocol::Gpsrq};
    std::vector<std::size_t> nodeCounts{10};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4};
    std::vector<double> betas{0.6};
    std::vector<double> alphas{0.5};
    std::vector<std::size_t> windows{5};
    std::vector<bool> cacheModes{true};

    std::size_t jobs = 1;

    /// Every key=value pair as read, echoed into output metadata.
    std::vector<std::pair<std::string, std::string>> echo;
};

/// Parses `key=value` lines; `#` starts a comment. Sweep keys accept comma
/// separated lists. Throws std::invalid_argument naming the offending line.
ExperimentConfig parseSweepSpec(std::istream& in);
ExperimentConfig parseSweepSpec(const std::string& text);

struct SweepPoint {
    Protocol protocol = Protocol::Gpsrq;
    std::size_t nodes = 0;
    std::uint64_t seed = 0;
    double beta = 0.0;
    double alpha = 0.0;
    std::size_t window = 0;
    bool cache = true;
};

struct SweepRow {
    SweepPoint point;
    std::optional<RunStats> stats;   // empty when the run failed
    std::string error;
};

/// Topology used for a (nodes, seed) pair of the sweep.
Topology sweepTopology(const ExperimentConfig& cfg, std::size_t nodes, std::uint64_t seed);
SimulationConfig sweepRunConfig(const ExperimentConfig& cfg, const SweepPoint& p);

std::vector<SweepPoint> expand(const ExperimentConfig& cfg);
/// Runs every point (concurrently when cfg.jobs > 1); rows come back in
/// expansion order regardless of completion order.
std::vector<SweepRow> runSweep(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader =
    "protocol,nodes,seed,beta,alpha,t_avg_window,cache,sent,received,pdr,mean_delay_s,mean_hops,"
    "ovh_pkts,ovh_bytes,key_data_bits,key_routing_bits,drop_queue,drop_delay,drop_source,drop_link";

std::string csvRow(const SweepPoint& p, const RunStats& s);
/// Header, one row per run, then one `mean` row per configuration across seeds.
void writeCsv(std::ostream& out, const std::vector<SweepRow>& rows);

} // namespace qkdnet
