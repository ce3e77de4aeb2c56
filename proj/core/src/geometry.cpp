#include "qkdnet/geometry.hpp"

#include <cmath>
#include <numbers>

namespace qkdnet {

namespace {

double cross(Position o, Position a, Position b) noexcept
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

} // namespace

double euclideanDistance(Position a, Position b) noexcept
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double squaredDistance(Position a, Position b) noexcept
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

double bearing(Position from, Position to) noexcept
{
    double angle = std::atan2(to.y - from.y, to.x - from.x);
    if (angle < 0.0)
        angle += 2.0 * std::numbers::pi;
    return angle;
}

bool segmentsCross(Position a1, Position a2, Position b1, Position b2) noexcept
{
    const double d1 = cross(b1, b2, a1);
    const double d2 = cross(b1, b2, a2);
    const double d3 = cross(a1, a2, b1);
    const double d4 = cross(a1, a2, b2);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

std::optional<Position> segmentCrossing(Position a1, Position a2, Position b1, Position b2) noexcept
{
    if (!segmentsCross(a1, a2, b1, b2))
        return std::nullopt;
    const double rx = a2.x - a1.x;
    const double ry = a2.y - a1.y;
    const double sx = b2.x - b1.x;
    const double sy = b2.y - b1.y;
    const double denom = rx * sy - ry * sx;
    const double t = ((b1.x - a1.x) * sy - (b1.y - a1.y) * sx) / denom;
    return Position{a1.x + t * rx, a1.y + t * ry};
}

std::optional<NodeId> counterclockwiseFrom(Position at, double referenceAngle,
                                           std::span<const PlacedNeighbor> neighbors)
{
    constexpr double fullTurn = 2.0 * std::numbers::pi;
    std::optional<NodeId> best;
    double bestDelta = 0.0;
    for (const auto& n : neighbors) {
        double delta = bearing(at, n.position) - referenceAngle;
        while (delta < 0.0)
            delta += fullTurn;
        while (delta >= fullTurn)
            delta -= fullTurn;
        if (delta == 0.0)
            delta = fullTurn;
        if (!best || delta < bestDelta || (delta == bestDelta && n.id < *best)) {
            best = n.id;
            bestDelta = delta;
        }
    }
    return best;
}

} // namespace qkdnet
