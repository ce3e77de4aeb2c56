// qkdsim: run QKD network routing simulations from the command line.

#include "qkdnet/experiment.hpp"
#include "qkdnet/simulator.hpp"
#include "qkdnet/topology.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace qkdnet;

namespace {

// QKDSIM_LOG=quiet|info|debug
int logLevel()
{
    const char* v = std::getenv("QKDSIM_LOG");
    if (!v || std::strcmp(v, "info") == 0)
        return 1;
    if (std::strcmp(v, "quiet") == 0)
        return 0;
    if (std::strcmp(v, "debug") == 0)
        return 2;
    return 1;
}

void logLine(int level, const std::string& msg)
{
    if (level <= logLevel())
        std::cerr << "qkdsim: " << msg << '\n';
}

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ostream& openOut(const std::string& path, std::ofstream& file)
{
    if (path.empty() || path == "-")
        return std::cout;
    file.open(path);
    if (!file)
        throw ConfigError("cannot write " + path);
    return file;
}

void writeMeta(const std::string& out, const std::vector<std::pair<std::string, std::string>>& kv)
{
    if (out.empty() || out == "-")
        return;
    std::ofstream meta(out + ".meta");
    for (const auto& [k, v] : kv)
        meta << k << '=' << v << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Trusted-relay QKD network routing simulator"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run one simulation and write a CSV row");
    std::string topoFile;
    int waxmanNodes = 0;
    std::uint64_t seed = 1;
    bool gabriel = false;
    std::string protocol = "gpsrq";
    SimulationConfig cfg;
    bool noCache = false;
    std::string out;
    bool dumpCache = false;
    std::string dvMode = "triggered";
    auto* topoOpt = sim->add_option("--topology", topoFile, "Topology file");
    auto* waxOpt = sim->add_option("--waxman", waxmanNodes, "Generate a Waxman topology with N nodes");
    topoOpt->excludes(waxOpt);
    sim->add_option("--seed", seed, "Run seed");
    sim->add_flag("--gabriel", gabriel, "Reduce the generated topology to its Gabriel graph");
    sim->add_option("--protocol", protocol, "gpsrq or dv")->check(CLI::IsMember({"gpsrq", "dv"}));
    sim->add_option("--beta", cfg.beta, "Distance weight")->check(CLI::Range(0.0, 1.0));
    sim->add_option("--alpha", cfg.alpha, "Quantum metric weight")->check(CLI::Range(0.0, 1.0));
    sim->add_option("--t-avg-window", cfg.tAverageWindow, "Samples in the T_average window")->check(CLI::PositiveNumber);
    sim->add_flag("--no-cache", noCache, "Disable the exclusion cache");
    sim->add_option("--duration", cfg.duration, "Simulated seconds")->check(CLI::PositiveNumber);
    sim->add_option("--rate", cfg.traffic.rateBps, "Traffic rate in bit/s");
    sim->add_option("--packet-bytes", cfg.traffic.packetBytes, "Payload bytes per packet");
    sim->add_option("--dv-mode", dvMode, "triggered or dead-interval")
        ->check(CLI::IsMember({"triggered", "dead-interval"}));
    sim->add_option("--out", out, "CSV output file (default stdout)");
    sim->add_flag("--dump-cache", dumpCache, "Print live cache records at the end of the run");

    // gen-topology
    auto* gen = app.add_subcommand("gen-topology", "Write a Waxman topology file");
    WaxmanConfig wax;
    wax.gridSize = 100.0;
    wax.lambdaMax = 100.0;
    bool genGabriel = false;
    std::string genOut;
    gen->add_option("--nodes", wax.nodeCount, "Node count")->required();
    gen->add_option("--seed", wax.seed, "Generator seed");
    gen->add_option("--theta", wax.theta, "Waxman theta");
    gen->add_option("--omega", wax.omega, "Waxman omega");
    gen->add_option("--lambda", wax.lambdaMax, "Maximum distance (0 = grid diagonal)");
    gen->add_option("--grid", wax.gridSize, "Grid side length");
    gen->add_option("--m", wax.m, "Links per new node");
    gen->add_flag("--gabriel", genGabriel, "Keep only Gabriel edges");
    gen->add_option("--out", genOut, "Output file (default stdout)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
    std::string specFile;
    std::string sweepOut;
    std::size_t jobs = 0;
    sweep->add_option("--spec", specFile, "Sweep specification file")->required();
    sweep->add_option("--out", sweepOut, "CSV output file (default stdout)");
    sweep->add_option("--jobs", jobs, "Parallel runs (overrides the sweep file)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sim) {
            Topology topo;
            if (!topoFile.empty()) {
                std::ifstream in(topoFile);
                if (!in)
                    throw ConfigError("cannot read " + topoFile);
                topo = readTopology(in);
            } else if (waxmanNodes > 0) {
                ExperimentConfig ec;
                ec.waxman.gridSize = 100.0;
                ec.waxman.lambdaMax = 100.0;
                ec.gabriel = gabriel;
                topo = sweepTopology(ec, static_cast<std::size_t>(waxmanNodes), seed);
            } else {
                throw ConfigError("simulate needs --topology FILE or --waxman N");
            }
            cfg.protocol = parseProtocol(protocol);
            cfg.seed = seed;
            cfg.cacheEnabled = !noCache;
            cfg.dv.mode = dvMode == "dead-interval" ? DvMode::DeadInterval : DvMode::Triggered;
            Simulator s(cfg, topo);
            const RunStats st = s.run();
            std::printf("trace-hash %016llx\n", static_cast<unsigned long long>(st.traceHash));
            if (!st.keyConservation || st.priorityViolations || st.causalityViolations)
                logLine(0, "invariant violation detected");
            if (dumpCache)
                for (const auto& line : s.cacheDump(cfg.duration))
                    std::printf("%s\n", line.c_str());
            SweepPoint p{cfg.protocol, topo.nodeCount(), seed, cfg.beta, cfg.alpha, cfg.tAverageWindow,
                         cfg.cacheEnabled};
            std::ofstream file;
            std::ostream& os = openOut(out, file);
            os << kCsvHeader << '\n' << csvRow(p, st) << '\n';
            writeMeta(out, {{"protocol", protocol},
                            {"topology", topoFile.empty() ? "waxman:" + std::to_string(waxmanNodes) : topoFile},
                            {"gabriel", gabriel ? "1" : "0"},
                            {"seed", std::to_string(seed)},
                            {"beta", std::to_string(cfg.beta)},
                            {"alpha", std::to_string(cfg.alpha)},
                            {"t_avg_window", std::to_string(cfg.tAverageWindow)},
                            {"cache", noCache ? "0" : "1"},
                            {"duration", std::to_string(cfg.duration)},
                            {"traffic_rate_bps", std::to_string(cfg.traffic.rateBps)},
                            {"packet_bytes", std::to_string(cfg.traffic.packetBytes)},
                            {"dv_mode", dvMode}});
        } else if (*gen) {
            const GeneratedTopology g = generateWaxman(wax, genGabriel);
            logLine(2, "topology retries " + std::to_string(g.retries));
            std::ofstream file;
            writeTopology(openOut(genOut, file), g.topology);
        } else if (*sweep) {
            std::ifstream in(specFile);
            if (!in)
                throw ConfigError("cannot read " + specFile);
            ExperimentConfig ec = parseSweepSpec(in);
            if (jobs > 0)
                ec.jobs = jobs;
            const auto rows = runSweep(ec);
            for (const auto& r : rows)
                if (!r.stats)
                    logLine(0, "run failed (" + std::to_string(r.point.nodes) + " nodes, seed "
                                   + std::to_string(r.point.seed) + "): " + r.error);
            std::ofstream file;
            writeCsv(openOut(sweepOut, file), rows);
            writeMeta(sweepOut, ec.echo);
        }
    } catch (const std::invalid_argument& e) {
        logLine(0, std::string("config error: ") + e.what());
        return 2;
    } catch (const ConfigError& e) {
        logLine(0, std::string("config error: ") + e.what());
        return 2;
    } catch (const TopologyError& e) {
        logLine(0, std::string("topology error: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        logLine(0, std::string("error: ") + e.what());
        return 1;
    }
    return 0;
}
