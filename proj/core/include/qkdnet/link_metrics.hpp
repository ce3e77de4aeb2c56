#pragma once

#include "qkdnet/key_storage.hpp"

#include <span>

namespace qkdnet {

/// Mean current key level over a node's adjacent links (the L value a node
/// advertises). Throws std::invalid_argument for an isolated node.
double localMeanKey(std::span<const double> adjacentCurrent);

/// Link threshold agreed from the two endpoint means.
constexpr double linkThreshold(double li, double lj) noexcept { return li < lj ? li : lj; }

struct QuantumMetric {
    double fraction;   // M_cur^2 * M_thr / M_max^3
    double value;      // 1 - fraction / e^(1 - fraction); lower is better
};

QuantumMetric quantumMetric(double current, double threshold, double maximum);

/// (T_last + dt) / (2 * T_average), dt measured from when T_last was recorded.
/// Not clamped: values above 1 flag a link that should not be used.
double publicMetric(const PublicChannelStats& stats, double now);

constexpr double linkMetric(double quantum, double publicChannel, double alpha) noexcept
{
    return alpha * quantum + (1.0 - alpha) * publicChannel;
}

struct MetricSnapshot {
    double qFrac = 0.0;
    double qM = 0.0;
    double pM = 0.0;
    double rM = 0.0;
    double measuredAt = 0.0;
    double alpha = 0.5;
};

MetricSnapshot measureLink(const KeyStorage& storage, double threshold, const PublicChannelStats& stats,
                           double alpha, double now);

} // namespace qkdnet
