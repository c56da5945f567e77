#pragma once

#include "swarmmesh/node.hpp"

#include <initializer_list>
#include <utility>
#include <vector>

namespace swarmmesh::testing {

inline Tuple make_tuple(std::uint32_t writer, std::uint32_t seq, Rho rho, std::int64_t value = 0, Vec2 pos = {},
                        Step ts = 0)
{
    return Tuple{Key{TupleId{RobotId{writer}, seq}, rho}, value, pos, ts};
}

inline NodeParams params(std::uint32_t storage, std::uint32_t memory)
{
    NodeParams p;
    p.storage_S = storage;
    p.memory_M = memory;
    return p;
}

/// Neighbor table from (id, δ) pairs, every neighbor 0.5 m away.
inline std::vector<NeighborInfo> neighbors(std::initializer_list<std::pair<std::uint32_t, Delta>> list)
{
    std::vector<NeighborInfo> out;
    for (const auto& [id, d] : list)
        out.push_back(NeighborInfo{RobotId{id}, d, 0.5});
    return out;
}

template <typename T>
std::vector<T> sent_of(const std::vector<Message>& msgs)
{
    std::vector<T> out;
    for (const auto& m : msgs)
        if (const auto* p = std::get_if<T>(&m))
            out.push_back(*p);
    return out;
}

template <typename T>
std::vector<T> pending_of(const Node& n)
{
    std::vector<T> out;
    for (const auto& m : n.out_queue().pending())
        if (const auto* p = std::get_if<T>(&m))
            out.push_back(*p);
    return out;
}

inline bool holds_tau(const std::vector<Tuple>& v, const TupleId& tau)
{
    for (const auto& t : v)
        if (t.tau() == tau)
            return true;
    return false;
}

} // namespace swarmmesh::testing
