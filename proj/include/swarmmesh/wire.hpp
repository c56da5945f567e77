#pragma once

#include "swarmmesh/core.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace swarmmesh {

enum class QueryOp : std::uint8_t { get, count, sum, avg, min, max };

/// Keys with ρ in [k − delta, k + delta].
struct KeyRange {
    Rho k = 0;
    std::uint32_t delta = 0;
    QueryOp op = QueryOp::get;

    bool operator==(const KeyRange&) const = default;
};

/// Tuples whose event lies within `r` of `center`.
struct SpatialRange {
    Vec2 center;
    double r = 1.0;
    QueryOp op = QueryOp::get;

    bool operator==(const SpatialRange&) const = default;
};

using QuerySpec = std::variant<KeyRange, SpatialRange>;

QueryOp op_of(const QuerySpec& spec);

struct TuplesPayload {
    std::vector<Tuple> tuples;
    bool operator==(const TuplesPayload&) const = default;
};
struct CountPayload {
    std::uint32_t n = 0;
    bool operator==(const CountPayload&) const = default;
};
struct SumPayload {
    std::int64_t s = 0;
    bool operator==(const SumPayload&) const = default;
};
/// Partial average: the count and the sum travel together.
struct CountSumPayload {
    std::uint32_t n = 0;
    std::int64_t s = 0;
    bool operator==(const CountSumPayload&) const = default;
};
struct MinPayload {
    std::int64_t v = 0;
    bool operator==(const MinPayload&) const = default;
};
struct MaxPayload {
    std::int64_t v = 0;
    bool operator==(const MaxPayload&) const = default;
};

using ReplyPayload =
    std::variant<TuplesPayload, CountPayload, SumPayload, CountSumPayload, MinPayload, MaxPayload>;

struct Beacon {
    RobotId sender;
    Delta delta = 0;
    bool operator==(const Beacon&) const = default;
};

struct QueryFlood {
    QueryId qid;
    std::uint32_t hop = 0;
    QuerySpec spec;
    bool operator==(const QueryFlood&) const = default;
};

struct Reply {
    QueryId qid;
    ReplyId reply_id;
    std::uint32_t hop_stamp = 0;
    ReplyPayload payload;
    bool operator==(const Reply&) const = default;
};

/// Carries exactly one tuple to `dest`.
struct StoreRoute {
    RobotId dest;
    Tuple tuple;
    bool operator==(const StoreRoute&) const = default;
};

/// Removes every version of `tau` stamped strictly before `before`.
struct EraseFlood {
    QueryId qid;
    std::uint32_t hop = 0;
    TupleId tau;
    Step before = 0;
    bool operator==(const EraseFlood&) const = default;
};

/// Sent master → slave; the slave echoes it back unchanged.
struct Heartbeat {
    RobotId master;
    RobotId slave;
    TupleId tau;
    bool operator==(const Heartbeat&) const = default;
};

struct ReplicaAssign {
    RobotId master;
    RobotId slave;
    Tuple tuple;
    bool operator==(const ReplicaAssign&) const = default;
};

struct ReplicaKill {
    RobotId master;
    RobotId slave;
    TupleId tau;
    bool operator==(const ReplicaKill&) const = default;
};

using Message = std::variant<Beacon, QueryFlood, Reply, StoreRoute, EraseFlood, Heartbeat,
                             ReplicaAssign, ReplicaKill>;

/// A message as heard by a receiver. The sender id comes from the link layer
/// and is not part of the counted payload.
struct Packet {
    RobotId sender;
    Message message;
};

/// Bytes of one encoded tuple: τ 8, ρ 4, value 8, position 16, timestamp 4.
inline constexpr std::size_t tuple_wire_size = 40;

std::size_t message_size(const Message& m);

/// Largest message whose size does not depend on its contents (ReplicaAssign).
std::size_t max_fixed_message_size();

/// Most tuples one Reply may carry without exceeding `cap` bytes.
std::size_t tuples_per_reply(std::uint32_t cap);

class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void encode_into(const Message& m, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode(const Message& m);

/// Decodes one message from the front of `in` and advances it past the message.
Message decode_one(std::span<const std::uint8_t>& in);

/// Decodes a buffer holding exactly one message.
Message decode(std::span<const std::uint8_t> bytes);

/// One-line rendering for trace logs.
std::string to_string(const Message& m);
std::string to_string(const QuerySpec& spec);
std::string to_string(QueryOp op);

template <typename T>
bool holds(const Message& m)
{
    return std::holds_alternative<T>(m);
}

/// Per-robot FIFO of outgoing messages drained under a per-step byte budget.
class OutQueue {
public:
    void push(Message m) { pending_.push_back(std::move(m)); }

    /// Dequeues the longest FIFO prefix fitting in `cap` bytes. At most one
    /// StoreRoute leaves per call; later StoreRoutes keep their place.
    std::vector<Message> flush(std::uint32_t cap);

    std::size_t bytes_sent_this_step() const { return bytes_sent_; }
    bool has_store_route() const;
    bool empty() const { return pending_.empty(); }
    std::size_t size() const { return pending_.size(); }
    std::size_t pending_bytes() const;

    const std::deque<Message>& pending() const { return pending_; }
    std::deque<Message>& pending() { return pending_; }

private:
    std::deque<Message> pending_;
    std::size_t bytes_sent_ = 0;
};

} // namespace swarmmesh
