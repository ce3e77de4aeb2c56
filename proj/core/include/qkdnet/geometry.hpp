#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace qkdnet {

using NodeId = std::uint32_t;

struct Position {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

double euclideanDistance(Position a, Position b) noexcept;
double squaredDistance(Position a, Position b) noexcept;

/// Direction of the vector from -> to, in [0, 2*pi).
double bearing(Position from, Position to) noexcept;

/// True when segments (a1,a2) and (b1,b2) cross at a point interior to both.
/// Touching at an endpoint or collinear overlap does not count.
bool segmentsCross(Position a1, Position a2, Position b1, Position b2) noexcept;

/// Crossing point of two segments under the same rule as segmentsCross.
std::optional<Position> segmentCrossing(Position a1, Position a2, Position b1, Position b2) noexcept;

struct PlacedNeighbor {
    NodeId id;
    Position position;
};

/// Right-hand rule step: the neighbor whose bearing from `at` is the first one
/// strictly counterclockwise of `referenceAngle`. A neighbor lying exactly on
/// the reference direction is taken last (a full turn), so a lone neighbor is
/// always returned. Equal bearings go to the smaller id.
std::optional<NodeId> counterclockwiseFrom(Position at, double referenceAngle,
                                           std::span<const PlacedNeighbor> neighbors);

} // namespace qkdnet
