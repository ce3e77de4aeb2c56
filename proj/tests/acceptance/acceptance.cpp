// End-to-end checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any of them fails.

#include "qkdnet/experiment.hpp"
#include "qkdnet/link_metrics.hpp"
#include "qkdnet/simulator.hpp"
#include "qkdnet/topology.hpp"

#include "detour.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace qkdnet;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;
};

int g_failures = 0;
std::vector<RunStats> g_allRuns;

void report(int id, const char* title, const std::function<Outcome()>& body)
{
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (!o.pass)
        ++g_failures;
    std::printf("%s %2d %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool relClose(double got, double want, double tol = 1e-9)
{
    return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

ExperimentConfig sweep30()
{
    ExperimentConfig e = parseSweepSpec(std::string{});
    e.nodeCounts = {30};
    e.seeds = {1, 2, 3, 4};
    e.jobs = jobs();
    return e;
}

std::vector<RunStats> run(const ExperimentConfig& e)
{
    std::vector<RunStats> out;
    for (const auto& row : runSweep(e)) {
        if (!row.stats)
            throw std::runtime_error("run failed: " + row.error);
        out.push_back(*row.stats);
        g_allRuns.push_back(*row.stats);
    }
    return out;
}

// Mean of `f` over consecutive groups of `per` rows.
std::vector<double> groupMeans(const std::vector<RunStats>& rows, std::size_t per, double (*f)(const RunStats&))
{
    std::vector<double> out;
    for (std::size_t i = 0; i < rows.size(); i += per) {
        double s = 0;
        for (std::size_t k = i; k < i + per; ++k)
            s += f(rows[k]);
        out.push_back(s / static_cast<double>(per));
    }
    return out;
}

double pdrOf(const RunStats& s) { return s.pdr; }
double hopsOf(const RunStats& s) { return s.meanHops; }
double ovhBytesOf(const RunStats& s) { return static_cast<double>(s.overheadBytes); }
double loop2Of(const RunStats& s) { return static_cast<double>(s.loop2Packets); }

Outcome metrics()
{
    const auto t0 = Clock::now();
    std::vector<std::string> bad;
    auto check = [&](const char* what, double got, double want) {
        if (!relClose(got, want))
            bad.push_back(fmt("%s=%.12g want %.12g", what, got, want));
    };

    const double lb = localMeanKey(std::vector<double>{60, 30, 20});
    const double lc = localMeanKey(std::vector<double>{20, 30});
    check("L_b", lb, 110.0 / 3.0);
    if (linkThreshold(lb, lc) != 25.0)
        bad.push_back("M_thr(b,c) != 25");

    check("q(0)", quantumMetric(0, 50, 100).value, 1.0);
    check("q_frac(max)", quantumMetric(100, 100, 100).fraction, 1.0);
    check("q(max)", quantumMetric(100, 100, 100).value, 0.0);
    check("q_frac(50)", quantumMetric(50, 50, 100).fraction, 0.125);
    check("q(50)", quantumMetric(50, 50, 100).value, 1.0 - 0.125 / std::exp(0.875));

    PublicChannelStats st(5, 5.0);
    st.recordKeyRound(5.0, 0.0);
    check("p(avg)", publicMetric(st, 0.0), 0.5);
    check("p(5+5)", publicMetric(st, 5.0), 1.0);
    PublicChannelStats boundary(3, 5.0);
    boundary.recordKeyRound(2.5, 0.0);
    boundary.recordKeyRound(2.5, 1.0);
    boundary.recordKeyRound(10.0, 2.0);   // average 5, so T_last is T_maximal
    check("p(max)", publicMetric(boundary, 2.0), 1.0);

    check("r(0.5)", linkMetric(0.4, 0.2, 0.5), 0.3);
    check("r(1)", linkMetric(0.4, 0.2, 1.0), 0.4);
    check("r(0)", linkMetric(0.4, 0.2, 0.0), 0.2);

    const double secs = elapsed(t0);
    if (secs >= 1.0)
        bad.push_back(fmt("took %.2fs", secs));
    std::string detail = bad.empty() ? fmt("L_b=%.6f M_thr=25 q(50,50,100)=%.9f", lb, quantumMetric(50, 50, 100).value)
                                     : bad.front();
    return {bad.empty(), detail};
}

// Two nodes, traffic well above the key rate: delivered key over a horizon
// approaches r_k once the initial stock is negligible.
Outcome tokenBucket()
{
    const auto t0 = Clock::now();
    Topology t(100);
    t.addNode(0, {10, 10});
    t.addNode(1, {60, 10});
    t.addEdge(0, 1);
    std::string detail;
    double rate1000 = 0;
    bool bounded = true;
    for (double horizon : {10.0, 100.0, 1000.0}) {
        SimulationConfig c;
        c.duration = horizon;
        c.link.initKeyMinBytes = c.link.initKeyMaxBytes = c.link.minKeyBytes;
        Simulator sim(c, t);
        const RunStats s = sim.run();
        g_allRuns.push_back(s);
        const double delivered = static_cast<double>(s.keyDataBits + s.keyRoutingBits);
        const double rate = delivered / horizon;
        // Premium signaling may also dip into the reserve
        const double bound = sim.link(0, 1).storage.rate() * horizon
                           + static_cast<double>(sim.link(0, 1).storage.minimum());
        bounded = bounded && delivered <= bound;
        detail += fmt("T=%g %.1f bit/s; ", horizon, rate);
        if (horizon == 1000.0)
            rate1000 = rate;
    }
    const double r = LinkDefaults{}.chargeRateBps;
    const double err = std::abs(rate1000 - r) / r;
    const double secs = elapsed(t0);
    detail += fmt("error at 1000 s %.2f%% (limit 5%%)", 100 * err);
    return {err <= 0.05 && bounded && secs < 5.0, detail};
}

Outcome gabrielOracle()
{
    const auto t0 = Clock::now();
    std::size_t edges = 0, violations = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        WaxmanConfig w;
        w.nodeCount = 30;
        w.seed = seed;
        w.lambdaMax = 100;
        const Topology full = generateWaxman(w).topology;
        const Topology gg = gabrielize(full);
        for (const Edge& e : full.edges()) {
            const Position pu = full.position(e.u), pv = full.position(e.v);
            const Position mid{(pu.x + pv.x) / 2, (pu.y + pv.y) / 2};
            const double r2 = squaredDistance(pu, pv) / 4;
            bool keep = true;
            for (const auto& [n, p] : full.nodes())
                if (n != e.u && n != e.v && squaredDistance(p, mid) < r2)
                    keep = false;
            if (keep != gg.hasEdge(e.u, e.v))
                ++violations;
        }
        for (const Edge& e : gg.edges()) {
            ++edges;
            if (!full.hasEdge(e.u, e.v))
                ++violations;
            for (const Edge& f : gg.edges())
                if (e < f && segmentsCross(gg.position(e.u), gg.position(e.v), gg.position(f.u), gg.position(f.v)))
                    ++violations;
        }
    }
    const double secs = elapsed(t0);
    return {violations == 0 && secs < 10.0, fmt("50 graphs, %zu kept edges, %zu violations", edges, violations)};
}

Outcome waxmanStats()
{
    WaxmanConfig w;
    w.lambdaMax = 100;
    Rng rng = makeStream(2024, "acceptance-waxman");
    double worst = 0;
    for (double d = 0; d <= 140; d += 10) {
        int hits = 0;
        for (int n = 0; n < 10000; ++n)
            hits += waxmanAccept(rng, d, w);
        worst = std::max(worst, std::abs(hits / 10000.0 - waxmanEdgeProbability(d, w)));
    }
    return {worst <= 0.02, fmt("15 distances x 1e4 trials, worst deviation %.4f (limit 0.02)", worst)};
}

Outcome detourTrace()
{
    using namespace detour;
    Simulator sim(config(), topology());
    sim.disableTraffic();
    sim.injectPacket(a, g, 1.0, TrafficClass::RealTime, 512);
    const RunStats s = sim.run();
    g_allRuns.push_back(s);

    const Topology topo = topology();
    auto half = [&](NodeId n) { return euclideanDistance(topo.position(n), topo.position(g)) / 2; };
    struct Step {
        NodeId node;
        RouteAction action;
        ForwardMode mode;
        NodeId next;
        unsigned loop;
        unsigned inRec;
        bool loopDetected;
        std::vector<std::pair<NodeId, double>> records;   // via, radius
    };
    using A = RouteAction;
    using M = ForwardMode;
    const std::vector<Step> want = {
        {a, A::Forward, M::Greedy, b, 0, 0, false, {}},
        {b, A::Return, M::Returned, a, 1, 0, false, {}},
        {a, A::Forward, M::Greedy, k, 2, 0, false, {{b, half(b)}}},
        {k, A::Forward, M::Greedy, j, 2, 0, false, {}},
        {j, A::Forward, M::RecoveryEntry, l, 2, 1, false, {}},
        {l, A::Forward, M::Recovery, k, 2, 1, false, {}},
        {k, A::Forward, M::Recovery, j, 2, 1, false, {}},
        {j, A::Return, M::Returned, k, 1, 0, true, {{l, half(l)}}},
        {k, A::Forward, M::Greedy, l, 2, 0, false, {{j, half(j)}}},
        {l, A::Forward, M::Greedy, j, 2, 0, false, {}},
        {j, A::Return, M::Returned, l, 1, 0, false, {}},
        {l, A::Return, M::Returned, k, 1, 0, false, {{j, half(j)}}},
        {k, A::Return, M::Returned, a, 1, 0, false, {{l, half(l)}}},
        {a, A::Discard, M::Greedy, a, 2, 0, false, {{k, half(k)}}},
    };
    const auto& tr = sim.trace();
    if (tr.size() != want.size())
        return {false, fmt("trace has %zu steps, expected %zu", tr.size(), want.size())};
    const Position gp = topo.position(g);
    for (std::size_t n = 0; n < want.size(); ++n) {
        const TraceEntry& e = tr[n];
        const Step& w = want[n];
        bool ok = e.node == w.node && e.action == w.action && e.mode == w.mode && e.fields.loop == w.loop
               && e.fields.inRecovery == w.inRec && e.loopDetected == w.loopDetected
               && e.newRecords.size() == w.records.size();
        if (w.action != A::Discard)
            ok = ok && e.nextHop == w.next;
        for (std::size_t r = 0; ok && r < w.records.size(); ++r) {
            const CacheRecord& c = e.newRecords[r];
            ok = c.via == w.records[r].first && relClose(c.radius, w.records[r].second) && c.center.x == gp.x
              && c.center.y == gp.y;
        }
        if (!ok)
            return {false, fmt("step %zu at %s (%s %s -> %s) differs", n + 1, name(e.node), toString(e.action),
                               toString(e.mode), name(e.nextHop))};
    }
    if (s.received != 0 || s.dropSource != 1)
        return {false, "packet not discarded at the source"};
    return {true, "14 steps: a->b, b returns, a->k, recovery j->l->k->j, loop at j, records at a, k, l, j; "
                  "discard at a"};
}

struct Shared {
    std::vector<RunStats> gpsrqBySize;   // nodes 10..50, 4 seeds each
    std::vector<RunStats> dv30;
    double overheadSecs = 0;
};

Outcome overheadTrend(Shared& sh)
{
    const auto t0 = Clock::now();
    ExperimentConfig e = sweep30();
    e.nodeCounts = {10, 20, 30, 40, 50};
    sh.gpsrqBySize = run(e);
    ExperimentConfig dv = sweep30();
    dv.protocols = {Protocol::Dv};
    sh.dv30 = run(dv);
    sh.overheadSecs = elapsed(t0);

    const auto g = groupMeans(sh.gpsrqBySize, 4, ovhBytesOf);
    const double dvMean = groupMeans(sh.dv30, 4, ovhBytesOf)[0];
    const double g30 = g[2];

    // least squares slope of log(bytes) on log(nodes)
    const double ns[] = {10, 20, 30, 40, 50};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 5; ++i) {
        const double x = std::log(ns[i]), y = std::log(g[i]);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (5 * sxy - sx * sy) / (5 * sxx - sx * sx);
    const bool ok = g30 <= dvMean / 5 && slope <= 1.15 && sh.overheadSecs < 120;
    return {ok, fmt("30 nodes: GPSRQ %.0f B vs DV %.0f B (ratio %.1f); log-log slope %.3f (limit 1.15)", g30, dvMean,
                    dvMean / g30, slope)};
}

Outcome pdrTrend(const Shared& sh)
{
    const std::vector<RunStats> g30(sh.gpsrqBySize.begin() + 8, sh.gpsrqBySize.begin() + 12);
    const double g = groupMeans(g30, 4, pdrOf)[0];
    const double d = groupMeans(sh.dv30, 4, pdrOf)[0];
    return {g >= d, fmt("mean PDR GPSRQ %.4f, DV %.4f", g, d)};
}

Outcome cacheAblation()
{
    ExperimentConfig e = sweep30();
    e.cacheModes = {true, false};
    const auto rows = run(e);
    const auto pdr = groupMeans(rows, 4, pdrOf);
    const auto l2 = groupMeans(rows, 4, loop2Of);
    const bool ok = pdr[1] <= pdr[0] && l2[1] > l2[0];
    return {ok, fmt("PDR on %.4f off %.4f; loop=2 packets on %.0f off %.0f", pdr[0], pdr[1], l2[0] * 4, l2[1] * 4)};
}

Outcome betaSweep()
{
    ExperimentConfig e = sweep30();
    e.betas = {0.0, 0.6, 1.0};
    const auto hops = groupMeans(run(e), 4, hopsOf);
    const bool ok = hops[0] >= hops[1] && hops[2] >= hops[1];
    return {ok, fmt("mean hops beta=0 %.3f, 0.6 %.3f, 1 %.3f", hops[0], hops[1], hops[2])};
}

Outcome windowSweep()
{
    ExperimentConfig e = sweep30();
    e.windows = {2, 5, 10};
    const auto hops = groupMeans(run(e), 4, hopsOf);
    const bool ok = hops[0] <= hops[1] && hops[1] <= hops[2];
    return {ok, fmt("mean hops window 2 %.3f, 5 %.3f, 10 %.3f", hops[0], hops[1], hops[2])};
}

#ifdef QKDSIM_PATH
std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
#endif

Outcome determinism()
{
#ifndef QKDSIM_PATH
    return {false, "qkdsim was not built"};
#else
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / fmt("qkdsim-accept-%llx", static_cast<unsigned long long>(Clock::now().time_since_epoch().count()));
    fs::create_directories(dir);
    std::string hash[2], csv[2];
    for (int n = 0; n < 2; ++n) {
        const fs::path out = dir / fmt("run%d.csv", n);
        const fs::path log = dir / fmt("run%d.txt", n);
        const std::string cmd = std::string("QKDSIM_LOG=quiet \"") + QKDSIM_PATH
                              + "\" simulate --waxman 30 --gabriel --seed 7 --protocol gpsrq --beta 0.6 --alpha 0.5"
                                " --t-avg-window 5 --duration 150 --out \""
                              + out.string() + "\" > \"" + log.string() + "\"";
        if (std::system(cmd.c_str()) != 0)
            return {false, "qkdsim exited with an error"};
        hash[n] = slurp(log);
        csv[n] = slurp(out);
    }
    fs::remove_all(dir);
    const bool ok = !hash[0].empty() && hash[0] == hash[1] && csv[0].size() > 100 && csv[0] == csv[1];
    std::string line = hash[0].substr(0, hash[0].find('\n'));
    return {ok, "two processes: " + line + (ok ? ", identical CSV" : ", outputs differ")};
#endif
}

Outcome invariants()
{
    std::size_t bad = 0;
    for (const RunStats& s : g_allRuns)
        if (!s.keyConservation || s.priorityViolations || s.causalityViolations || !s.packetsBalance())
            ++bad;
    return {bad == 0 && !g_allRuns.empty(),
            fmt("%zu runs, %zu with a conservation, ordering or balance violation", g_allRuns.size(), bad)};
}

} // namespace

int main()
{
    Shared sh;
    report(1, "metric exactness", metrics);
    report(2, "token-bucket key rate", tokenBucket);
    report(3, "Gabriel planarity oracle", gabrielOracle);
    report(4, "Waxman acceptance statistics", waxmanStats);
    report(5, "recovery scenario trace", detourTrace);
    report(6, "routing overhead trend", [&] { return overheadTrend(sh); });
    report(7, "PDR GPSRQ vs DV", [&] { return pdrTrend(sh); });
    report(8, "cache ablation", cacheAblation);
    report(9, "beta sweep hops", betaSweep);
    report(10, "T_average window sweep hops", windowSweep);
    report(11, "determinism across processes", determinism);
    report(12, "accounting invariants", invariants);
    std::printf("%d of 12 criteria failed\n", g_failures);
    return g_failures ? 1 : 0;
}
