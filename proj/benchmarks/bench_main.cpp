#include "qkdnet/link_metrics.hpp"
#include "qkdnet/packet.hpp"
#include "qkdnet/simulator.hpp"
#include "qkdnet/topology.hpp"

#include <benchmark/benchmark.h>

using namespace qkdnet;

static void BM_QuantumMetric(benchmark::State& state)
{
    double cur = 10;
    for (auto _ : state) {
        benchmark::DoNotOptimize(quantumMetric(cur, 40, 100));
        cur = cur > 99 ? 10 : cur + 0.5;
    }
}
BENCHMARK(BM_QuantumMetric);

static void BM_Gabrielize(benchmark::State& state)
{
    WaxmanConfig w;
    w.nodeCount = static_cast<int>(state.range(0));
    w.lambdaMax = 100;
    const Topology t = generateWaxman(w).topology;
    for (auto _ : state)
        benchmark::DoNotOptimize(gabrielize(t));
}
BENCHMARK(BM_Gabrielize)->Arg(30)->Arg(100);

static void BM_HeaderRoundTrip(benchmark::State& state)
{
    QkdHeader h;
    h.length = 548;
    h.messageId = 77;
    h.r = 1;
    h.l = 2;
    QkdCommandHeader c;
    c.recIf = 4;
    c.recPosition = 9;
    for (auto _ : state) {
        const auto bytes = serializeHeaders(h, c);
        benchmark::DoNotOptimize(deserializeHeaders(bytes));
    }
}
BENCHMARK(BM_HeaderRoundTrip);

static void BM_Simulation(benchmark::State& state)
{
    WaxmanConfig w;
    w.nodeCount = static_cast<int>(state.range(0));
    w.lambdaMax = 100;
    const Topology t = generateWaxman(w, true).topology;
    SimulationConfig c;
    c.duration = 30;
    c.protocol = state.range(1) ? Protocol::Dv : Protocol::Gpsrq;
    for (auto _ : state)
        benchmark::DoNotOptimize(runSimulation(c, t));
}
BENCHMARK(BM_Simulation)->Args({30, 0})->Args({30, 1})->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
