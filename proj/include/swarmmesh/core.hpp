#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace swarmmesh {

/// Simulation time in steps. Doubles as the global-time version stamp of tuples.
using Step = std::uint32_t;

/// Content-dependent hash of a tuple. Higher means more valuable.
using Rho = std::uint32_t;

/// Self-assigned node identifier (free slots times neighbor count, 1 when isolated).
using Delta = std::uint32_t;

struct RobotId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const RobotId&) const = default;
};

struct TupleId {
    RobotId writer;
    std::uint32_t seq = 0;

    constexpr auto operator<=>(const TupleId&) const = default;
};

struct Key {
    TupleId tau;
    Rho rho = 0;

    constexpr bool operator==(const Key&) const = default;
};

struct QueryId {
    RobotId origin;
    std::uint32_t seq = 0;

    constexpr auto operator<=>(const QueryId&) const = default;
};

/// Identifies one reply message so that relays and the origin can drop copies.
struct ReplyId {
    RobotId replier;
    std::uint32_t seq = 0;

    constexpr auto operator<=>(const ReplyId&) const = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);
double norm(Vec2 v);

struct Tuple {
    Key key;
    std::int64_t value = 0;
    Vec2 position;
    Step timestamp = 0;

    const TupleId& tau() const { return key.tau; }
    Rho rho() const { return key.rho; }

    bool operator==(const Tuple&) const = default;
};

std::string to_string(RobotId id);
std::string to_string(const TupleId& id);
std::string to_string(const QueryId& id);

} // namespace swarmmesh

template <>
struct std::hash<swarmmesh::TupleId> {
    std::size_t operator()(const swarmmesh::TupleId& t) const noexcept
    {
        return std::hash<std::uint64_t>{}((std::uint64_t{t.writer.value} << 32) | t.seq);
    }
};
