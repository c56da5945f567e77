#pragma once

#include "swarmmesh/wire.hpp"

#include <optional>
#include <span>
#include <vector>

namespace swarmmesh {

bool matches(const QuerySpec& spec, const Tuple& t);

/// Evaluates a query over a node's active tuples. Count, sum and average
/// are defined over an empty match set; get over an empty set yields an
/// empty tuple list; min and max over an empty set yield nothing.
std::optional<ReplyPayload> match_local(const QuerySpec& spec, std::span<const Tuple> active);

/// Final value of a query assembled at its origin.
struct QueryOutcome {
    QueryOp op = QueryOp::get;
    std::size_t replies = 0;
    std::vector<Tuple> tuples; // get: one entry per τ, newest version, sorted by τ
    std::uint64_t count = 0;   // count, avg
    std::int64_t sum = 0;      // sum, avg
    std::optional<double> average;
    std::optional<std::int64_t> extreme; // min or max

    /// No reply arrived. Distinct from a reply carrying a zero value.
    bool empty() const { return replies == 0; }
};

/// Folds partial results. Throws std::invalid_argument on a payload kind
/// that does not belong to `op`.
QueryOutcome combine_at_source(QueryOp op, std::span<const ReplyPayload> replies);

} // namespace swarmmesh
