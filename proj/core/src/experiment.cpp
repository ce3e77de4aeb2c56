#include "qkdnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qkdnet {

namespace {

std::string trim(std::string s)
{
    const auto notSpace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notSpace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notSpace).base(), s.end());
    return s;
}

std::vector<std::string> splitList(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(trim(item));
    if (out.empty() || std::any_of(out.begin(), out.end(), [](const std::string& s) { return s.empty(); }))
        throw std::invalid_argument("empty list element");
    return out;
}

double toDouble(const std::string& s)
{
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v))
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

std::uint64_t toUnsigned(const std::string& s)
{
    if (s.empty() || s.front() == '-')
        throw std::invalid_argument("not a non-negative integer: '" + s + "'");
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size())
        throw std::invalid_argument("not an integer: '" + s + "'");
    return v;
}

bool toBool(const std::string& s)
{
    if (s == "1" || s == "on" || s == "true" || s == "yes")
        return true;
    if (s == "0" || s == "off" || s == "false" || s == "no")
        return false;
    throw std::invalid_argument("not a boolean: '" + s + "'");
}

template <class T, class F>
std::vector<T> mapList(const std::string& v, F f)
{
    std::vector<T> out;
    for (const auto& item : splitList(v))
        out.push_back(f(item));
    return out;
}

void applyKey(ExperimentConfig& cfg, const std::string& key, const std::string& value)
{
    SimulationConfig& b = cfg.base;
    if (key == "protocol")
        cfg.protocols = mapList<Protocol>(value, parseProtocol);
    else if (key == "nodes")
        cfg.nodeCounts = mapList<std::size_t>(value, [](const std::string& s) { return toUnsigned(s); });
    else if (key == "seeds" || key == "seed")
        cfg.seeds = mapList<std::uint64_t>(value, toUnsigned);
    else if (key == "beta")
        cfg.betas = mapList<double>(value, toDouble);
    else if (key == "alpha")
        cfg.alphas = mapList<double>(value, toDouble);
    else if (key == "t_avg_window")
        cfg.windows = mapList<std::size_t>(value, [](const std::string& s) { return toUnsigned(s); });
    else if (key == "cache")
        cfg.cacheModes = mapList<bool>(value, toBool);
    else if (key == "duration")
        b.duration = toDouble(value);
    else if (key == "traffic_rate_bps")
        b.traffic.rateBps = toDouble(value);
    else if (key == "packet_bytes")
        b.traffic.packetBytes = toUnsigned(value);
    else if (key == "traffic_class") {
        if (value == "realtime")
            b.traffic.cls = TrafficClass::RealTime;
        else if (value == "besteffort")
            b.traffic.cls = TrafficClass::BestEffort;
        else
            throw std::invalid_argument("traffic_class must be realtime or besteffort");
    } else if (key == "cipher") {
        if (value == "otp")
            b.traffic.cipher = Cipher::Otp;
        else if (value == "aes")
            b.traffic.cipher = Cipher::Aes;
        else
            throw std::invalid_argument("cipher must be otp or aes");
    } else if (key == "charging")
        b.chargingEnabled = toBool(value);
    else if (key == "queue_capacity")
        b.queueCapacity = toUnsigned(value);
    else if (key == "propagation_delay_s")
        b.propagationDelay = toDouble(value);
    else if (key == "max_delay_realtime_s")
        b.maxDelayRealTime = toDouble(value);
    else if (key == "max_delay_besteffort_s")
        b.maxDelayBestEffort = toDouble(value);
    else if (key == "round_stddev_fraction")
        b.rounds.stddevFraction = toDouble(value);
    else if (key == "load_coupling")
        b.rounds.loadCoupling = toDouble(value);
    else if (key == "dv_mode") {
        if (value == "triggered")
            b.dv.mode = DvMode::Triggered;
        else if (value == "dead-interval")
            b.dv.mode = DvMode::DeadInterval;
        else
            throw std::invalid_argument("dv_mode must be triggered or dead-interval");
    } else if (key == "dv_period_s")
        b.dv.period = toDouble(value);
    else if (key == "dv_merge_window_s")
        b.dv.mergeWindow = toDouble(value);
    else if (key == "min_key_bytes")
        b.link.minKeyBytes = toDouble(value);
    else if (key == "max_key_bytes")
        b.link.maxKeyBytes = toDouble(value);
    else if (key == "init_key_bytes_range") {
        const auto colon = value.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("init_key_bytes_range must be LO:HI");
        b.link.initKeyMinBytes = toDouble(trim(value.substr(0, colon)));
        b.link.initKeyMaxBytes = toDouble(trim(value.substr(colon + 1)));
    } else if (key == "rate_bps")
        b.link.chargeRateBps = toDouble(value);
    else if (key == "charge_period_s")
        b.link.chargePeriod = toDouble(value);
    else if (key == "bandwidth_bps")
        b.link.bandwidthBps = toDouble(value);
    else if (key == "auth_key_bits")
        b.controlCost.authKeyBits = static_cast<Bits>(toUnsigned(value));
    else if (key == "gabriel")
        cfg.gabriel = toBool(value);
    else if (key == "grid_size")
        cfg.waxman.gridSize = toDouble(value);
    else if (key == "lambda")
        cfg.waxman.lambdaMax = toDouble(value);
    else if (key == "theta")
        cfg.waxman.theta = toDouble(value);
    else if (key == "omega")
        cfg.waxman.omega = toDouble(value);
    else if (key == "waxman_m")
        cfg.waxman.m = static_cast<int>(toUnsigned(value));
    else if (key == "jobs")
        cfg.jobs = std::max<std::size_t>(1, toUnsigned(value));
    else
        throw std::invalid_argument("unknown key '" + key + "'");
}

std::string fmt(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string pointPrefix(const SweepPoint& p, const std::string& seed)
{
    return std::string(toString(p.protocol)) + "," + std::to_string(p.nodes) + "," + seed + "," + fmt(p.beta) + ","
         + fmt(p.alpha) + "," + std::to_string(p.window) + "," + (p.cache ? "1" : "0");
}

std::vector<double> statColumns(const RunStats& s)
{
    return {static_cast<double>(s.sent),          static_cast<double>(s.received),
            s.pdr,                                s.meanDelay,
            s.meanHops,                           static_cast<double>(s.overheadPackets),
            static_cast<double>(s.overheadBytes), static_cast<double>(s.keyDataBits),
            static_cast<double>(s.keyRoutingBits), static_cast<double>(s.dropQueue),
            static_cast<double>(s.dropDelay),     static_cast<double>(s.dropSource),
            static_cast<double>(s.dropLink)};
}

} // namespace

ExperimentConfig parseSweepSpec(std::istream& in)
{
    ExperimentConfig cfg;
    cfg.base.duration = 150.0;
    cfg.waxman.gridSize = 100.0;
    cfg.waxman.lambdaMax = 100.0;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineNo) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            applyKey(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument("line " + std::to_string(lineNo) + " (" + key + "): " + e.what());
        }
        cfg.echo.emplace_back(key, value);
    }
    cfg.base.validate();
    cfg.waxman.validate();
    for (double b : cfg.betas)
        if (b < 0 || b > 1)
            throw std::invalid_argument("beta must lie in [0,1]");
    for (double a : cfg.alphas)
        if (a < 0 || a > 1)
            throw std::invalid_argument("alpha must lie in [0,1]");
    for (std::size_t n : cfg.nodeCounts)
        if (n < 2)
            throw std::invalid_argument("nodes must be at least 2");
    for (std::size_t w : cfg.windows)
        if (w < 1)
            throw std::invalid_argument("t_avg_window must be at least 1");
    return cfg;
}

ExperimentConfig parseSweepSpec(const std::string& text)
{
    std::istringstream in(text);
    return parseSweepSpec(in);
}

Topology sweepTopology(const ExperimentConfig& cfg, std::size_t nodes, std::uint64_t seed)
{
    WaxmanConfig w = cfg.waxman;
    w.nodeCount = static_cast<int>(nodes);
    w.seed = mixSeed(seed ^ hashName("topology"));
    return generateWaxman(w, cfg.gabriel).topology;
}

SimulationConfig sweepRunConfig(const ExperimentConfig& cfg, const SweepPoint& p)
{
    SimulationConfig s = cfg.base;
    s.protocol = p.protocol;
    s.seed = p.seed;
    s.beta = p.beta;
    s.alpha = p.alpha;
    s.tAverageWindow = p.window;
    s.cacheEnabled = p.cache;
    return s;
}

std::vector<SweepPoint> expand(const ExperimentConfig& cfg)
{
    std::vector<SweepPoint> out;
    for (Protocol proto : cfg.protocols)
        for (std::size_t n : cfg.nodeCounts)
            for (double beta : cfg.betas)
                for (double alpha : cfg.alphas)
                    for (std::size_t w : cfg.windows)
                        for (bool cache : cfg.cacheModes)
                            for (std::uint64_t seed : cfg.seeds)
                                out.push_back({proto, n, seed, beta, alpha, w, cache});
    return out;
}

std::vector<SweepRow> runSweep(const ExperimentConfig& cfg)
{
    const std::vector<SweepPoint> points = expand(cfg);
    std::vector<SweepRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) {
            rows[i].point = points[i];
            try {
                const Topology topo = sweepTopology(cfg, points[i].nodes, points[i].seed);
                rows[i].stats = runSimulation(sweepRunConfig(cfg, points[i]), topo);
            } catch (const std::exception& e) {
                rows[i].error = e.what();
            }
        }
    };
    const std::size_t jobs = std::min(cfg.jobs, std::max<std::size_t>(1, points.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    return rows;
}

std::string csvRow(const SweepPoint& p, const RunStats& s)
{
    std::string row = pointPrefix(p, std::to_string(p.seed));
    row += "," + std::to_string(s.sent) + "," + std::to_string(s.received) + "," + fmt(s.pdr) + ","
         + fmt(s.meanDelay) + "," + fmt(s.meanHops) + "," + std::to_string(s.overheadPackets) + ","
         + std::to_string(s.overheadBytes) + "," + std::to_string(s.keyDataBits) + ","
         + std::to_string(s.keyRoutingBits) + "," + std::to_string(s.dropQueue) + "," + std::to_string(s.dropDelay)
         + "," + std::to_string(s.dropSource) + "," + std::to_string(s.dropLink);
    return row;
}

void writeCsv(std::ostream& out, const std::vector<SweepRow>& rows)
{
    out << kCsvHeader << '\n';
    for (const SweepRow& r : rows) {
        if (r.stats) {
            out << csvRow(r.point, *r.stats) << '\n';
        } else {
            out << pointPrefix(r.point, std::to_string(r.point.seed));
            for (int i = 0; i < 13; ++i)
                out << ",nan";
            out << '\n';
        }
    }

    // group rows that differ only in seed, keeping first-appearance order
    std::vector<std::pair<SweepPoint, std::vector<const RunStats*>>> groups;
    for (const SweepRow& r : rows) {
        auto same = [&](const auto& g) {
            const SweepPoint& a = g.first;
            const SweepPoint& b = r.point;
            return a.protocol == b.protocol && a.nodes == b.nodes && a.beta == b.beta && a.alpha == b.alpha
                && a.window == b.window && a.cache == b.cache;
        };
        auto it = std::find_if(groups.begin(), groups.end(), same);
        if (it == groups.end()) {
            groups.push_back({r.point, {}});
            it = groups.end() - 1;
        }
        if (r.stats)
            it->second.push_back(&*r.stats);
    }
    for (const auto& [p, members] : groups) {
        out << pointPrefix(p, "mean");
        std::vector<double> sums(13, 0.0);
        for (const RunStats* s : members) {
            const auto cols = statColumns(*s);
            for (std::size_t i = 0; i < cols.size(); ++i)
                sums[i] += cols[i];
        }
        for (double v : sums)
            out << ',' << fmt(members.empty() ? std::nan("") : v / static_cast<double>(members.size()));
        out << '\n';
    }
}

} // namespace qkdnet
