#pragma once

#include "swarmmesh/config.hpp"
#include "swarmmesh/hashing.hpp"
#include "swarmmesh/query.hpp"
#include "swarmmesh/wire.hpp"

#include <deque>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace swarmmesh {

/// Free storage slots times neighbor count; 1 for an isolated robot.
Delta compute_delta(std::uint32_t free_slots, std::size_t neighbor_count);

/// Condition (H): a node may hold a tuple iff its identifier exceeds ρ.
constexpr bool can_hold(Delta delta, Rho rho)
{
    return delta > rho;
}

/// Insertion-ordered map that forgets its oldest entry once full.
template <typename K, typename V>
class BoundedCache {
public:
    explicit BoundedCache(std::size_t capacity) : capacity_(capacity) {}

    V* find(const K& key)
    {
        auto it = map_.find(key);
        return it == map_.end() ? nullptr : &it->second;
    }
    const V* find(const K& key) const
    {
        auto it = map_.find(key);
        return it == map_.end() ? nullptr : &it->second;
    }
    bool contains(const K& key) const { return map_.contains(key); }

    void insert(const K& key, V value)
    {
        if (auto it = map_.find(key); it != map_.end()) {
            it->second = std::move(value);
            return;
        }
        if (order_.size() == capacity_) {
            map_.erase(order_.front());
            order_.pop_front();
        }
        order_.push_back(key);
        map_.emplace(key, std::move(value));
    }
    std::size_t size() const { return map_.size(); }

private:
    std::size_t capacity_;
    std::map<K, V> map_;
    std::deque<K> order_;
};

/// Tuples awaiting relocation. `top` is always the highest ρ; ties go to
/// the oldest version, then the lowest τ.
class RoutingQueue {
public:
    void push(const Tuple& t) { items_.push_back(t); }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    const Tuple& top() const;
    Tuple pop();
    /// Removes tuples satisfying `pred`, returning them.
    template <typename Pred>
    std::vector<Tuple> remove_if(Pred pred)
    {
        std::vector<Tuple> out;
        std::erase_if(items_, [&](const Tuple& t) {
            if (!pred(t))
                return false;
            out.push_back(t);
            return true;
        });
        return out;
    }
    const std::vector<Tuple>& items() const { return items_; }
    std::vector<Tuple>& items() { return items_; }

private:
    std::size_t top_index() const;
    std::vector<Tuple> items_;
};

struct NeighborInfo {
    RobotId id;
    Delta delta = 0;
    double distance = 0.0; // m

    bool operator==(const NeighborInfo&) const = default;
};

struct NodeParams {
    std::uint32_t storage_S = 10;
    std::uint32_t memory_M = 20;
    std::uint32_t bandwidth_cap = 570;
    std::uint32_t query_cache_size = 256;
    std::uint32_t reply_cache_size = 256;
    std::uint32_t collection_window = 150;
    HashSettings hashing;
    bool replication = false;
    double safe_radius = 1.0;
    std::uint32_t heartbeat_period = 5;
    std::uint32_t heartbeat_timeout = 30;
};

NodeParams node_params(const SimConfig& cfg);

enum class Disposition { stored, queued, discarded, superseded };

struct AcceptResult {
    Disposition disposition = Disposition::queued;
    std::optional<Tuple> victim; // evicted to keep occupancy within M
};

/// Observable protocol outcomes, drained by the harness each step.
struct NodeEvent {
    enum class Kind {
        written,           // new tuple version created by this robot
        stored,            // active tuple entered storage
        discarded,         // active tuple dropped on memory overflow
        erased,            // active tuple removed by an erase flood
        superseded,        // active tuple removed because a newer version exists
        replica_stored,
        replica_dropped,   // inactive copy removed (kill, overflow, erase)
        replica_activated, // inactive copy promoted after master silence
        slave_assigned,
    };
    Kind kind;
    Tuple tuple;
    Step step = 0;
    RobotId peer; // slave or master, when applicable
};

struct MasterRole {
    std::optional<RobotId> slave;
    Step last_ack = 0;
};

struct SlaveRole {
    RobotId master;
    Step last_heartbeat = 0;
};

struct CompletedQuery {
    QueryId qid;
    QuerySpec spec;
    Step emitted = 0;
    std::optional<Step> last_reply;
    QueryOutcome outcome;
};

/// One robot's SwarmMesh state machine. Inputs are delivered packets, the
/// neighbor snapshot and the clock; outputs go to the out queue and the
/// event list. Nodes share nothing.
class Node {
public:
    Node(RobotId me, NodeParams params, std::uint64_t seed);

    RobotId id() const { return me_; }
    const NodeParams& params() const { return params_; }

    void step(Step now, std::span<const Packet> delivered, std::vector<NeighborInfo> neighbors);

    // Phases of step(), exposed for scripted tests.
    void begin_step(Step now, std::vector<NeighborInfo> neighbors);
    void receive(const Packet& packet);
    void end_step();

    /// Messages leaving this step under the bandwidth cap. StoreRoutes whose
    /// destination is no longer a neighbor go back to the routing queue.
    std::vector<Message> transmit();

    // User-level operations.
    TupleId put(const EventRecord& event, Step now);
    /// New version of an existing τ; older versions are erased swarm-wide.
    void put_version(const TupleId& tau, const EventRecord& event, Step now);
    void erase(const TupleId& tau, Step now);
    QueryId query(const QuerySpec& spec, Step now);
    /// Queries whose collection window has elapsed.
    std::vector<CompletedQuery> take_completed(Step now);

    // Protocol operations.
    Delta delta() const;
    AcceptResult accept_tuple(const Tuple& t);
    std::optional<StoreRoute> route_step();
    std::optional<StoreRoute> address_optimize();
    void handle_query_flood(const QueryFlood& q);
    void forward_reply(const Reply& r);
    void handle_erase(const EraseFlood& e);
    void replication_tick();

    const std::vector<Tuple>& storage() const { return storage_; }
    const RoutingQueue& routing_queue() const { return routing_; }
    const std::vector<Tuple>& replica_store() const { return replicas_; }
    const OutQueue& out_queue() const { return out_; }
    const std::vector<NeighborInfo>& neighbors() const { return neighbors_; }
    const std::map<TupleId, MasterRole>& master_roles() const { return masters_; }
    const std::map<TupleId, SlaveRole>& slave_roles() const { return slaves_; }
    std::uint32_t write_count() const { return write_count_; }
    std::size_t occupancy() const { return storage_.size() + routing_.size() + replicas_.size(); }
    std::optional<std::uint32_t> cached_hop(const QueryId& qid) const;

    std::vector<NodeEvent> take_events();

    /// Test hook: places a tuple straight into storage, bypassing (H).
    void inject_stored(const Tuple& t);

private:
    struct PendingQuery {
        QuerySpec spec;
        Step emitted = 0;
        std::optional<Step> last_reply;
        std::map<ReplyId, ReplyPayload> replies;
    };

    std::uint32_t free_slots() const;
    const NeighborInfo* neighbor(RobotId id) const;
    std::vector<Tuple> active_tuples() const;
    void emit(NodeEvent::Kind kind, const Tuple& t, RobotId peer = {});
    void store(const Tuple& t);
    void drop_master_role(const TupleId& tau);
    std::optional<Tuple> enforce_capacity();
    void send_store_route(RobotId dest, const Tuple& t);
    void send_reply(const QueryId& qid, std::uint32_t hop, ReplyPayload payload);
    void handle_heartbeat(RobotId sender, const Heartbeat& h);
    void handle_assign(const ReplicaAssign& a);
    void handle_kill(const ReplicaKill& k);
    void flood_erase(const TupleId& tau, Step before, NodeEvent::Kind kind);
    /// Removes every active instance of `tau` older than `before`.
    void remove_versions(const TupleId& tau, Step before, NodeEvent::Kind kind);
    bool holds_active(const TupleId& tau) const;

    RobotId me_;
    NodeParams params_;
    std::mt19937_64 rng_;
    Step now_ = 0;

    std::vector<Tuple> storage_;
    RoutingQueue routing_;
    std::vector<Tuple> replicas_;
    std::vector<NeighborInfo> neighbors_;
    OutQueue out_;

    BoundedCache<QueryId, std::uint32_t> query_cache_;
    BoundedCache<ReplyId, bool> seen_replies_;
    std::map<QueryId, PendingQuery> pending_queries_;

    std::uint32_t write_count_ = 0;
    std::uint32_t query_count_ = 0;
    std::uint32_t reply_count_ = 0;

    std::map<TupleId, MasterRole> masters_;
    std::map<TupleId, SlaveRole> slaves_;

    std::vector<NodeEvent> events_;
};

} // namespace swarmmesh
