#include "qkdnet/link_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qkdnet {

double localMeanKey(std::span<const double> adjacentCurrent)
{
    if (adjacentCurrent.empty())
        throw std::invalid_argument("local mean undefined for a node without links");
    return std::accumulate(adjacentCurrent.begin(), adjacentCurrent.end(), 0.0)
           / static_cast<double>(adjacentCurrent.size());
}

QuantumMetric quantumMetric(double current, double threshold, double maximum)
{
    const double frac = std::clamp((current * current * threshold) / (maximum * maximum * maximum), 0.0, 1.0);
    return {frac, 1.0 - frac / std::exp(1.0 - frac)};
}

double publicMetric(const PublicChannelStats& stats, double now)
{
    const double freshness = now - stats.lastRecordedAt();
    return (stats.lastDuration() + freshness) / stats.maximal();
}

MetricSnapshot measureLink(const KeyStorage& storage, double threshold, const PublicChannelStats& stats,
                           double alpha, double now)
{
    MetricSnapshot s;
    const auto q = quantumMetric(static_cast<double>(storage.current()), threshold,
                                 static_cast<double>(storage.maximum()));
    s.qFrac = q.fraction;
    s.qM = q.value;
    s.pM = publicMetric(stats, now);
    s.alpha = alpha;
    s.rM = linkMetric(s.qM, s.pM, alpha);
    s.measuredAt = now;
    return s;
}

} // namespace qkdnet
