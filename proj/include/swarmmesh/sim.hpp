#pragma once

#include "swarmmesh/config.hpp"
#include "swarmmesh/hashing.hpp"
#include "swarmmesh/metrics.hpp"
#include "swarmmesh/node.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace swarmmesh {

struct RobotPose {
    Vec2 position;
    double heading = 0.0; // rad
    double speed = 0.0;   // m/s
};

/// Square arena [-half, half]^2.
struct Arena {
    double half = 0.0;

    bool contains(Vec2 p) const { return p.x >= -half && p.x <= half && p.y >= -half && p.y <= half; }
};

Arena make_arena(const SimConfig& cfg);

/// Adjacency by index: j is listed under i iff |p_i − p_j| ≤ range. Lists are sorted.
std::vector<std::vector<std::size_t>> build_neighbor_graph(std::span<const Vec2> positions, double range);

bool is_connected(const std::vector<std::vector<std::size_t>>& graph);

/// One diffusion step: jitter the heading, advance, reflect off the walls.
RobotPose move_diffusion(const RobotPose& pose, std::mt19937_64& rng, double dt, const Arena& arena,
                         double heading_jitter);

/// Index of the nearest position within `sensing_range`; ties go to the lower index.
std::optional<std::size_t> elect_writer(Vec2 event, std::span<const Vec2> positions,
                                        std::span<const std::uint8_t> alive, double sensing_range);

/// ⌈l_f · N · S⌉.
std::size_t event_target(const SimConfig& cfg);

/// Independent seed for one RNG stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct WorldOptions {
    bool generate_events = true;
    bool generate_queries = true;
    bool audit = true;  // consistency and conservation checks every step
    bool trace = false; // keep per-event trace rows
};

enum class RunPhase { generating, quiescent, draining, done };

/// A completed query next to what a brute-force scan of the live tuple
/// set produced when it was issued.
struct QueryResult {
    CompletedQuery done;
    QueryOutcome oracle;
};

struct TraceRow {
    Step step = 0;
    RobotId robot;
    std::string kind;
    std::string detail;
};

/// Discrete-time harness. Each step: move, rebuild the neighbor graph,
/// deliver last step's transmissions, run every node, transmit under the
/// cap, generate workload and elect writers, then record metrics.
class World {
public:
    explicit World(SimConfig cfg, WorldOptions opts = {});

    void step();
    /// Steps until the run timeline ends or `max_steps` is reached.
    void run();
    bool finished() const;

    Step clock() const { return clock_; }
    RunPhase phase() const { return phase_; }
    const SimConfig& config() const { return cfg_; }
    const Arena& arena() const { return arena_; }
    const MetricsLog& log() const { return log_; }
    MetricsLog& log() { return log_; }

    std::size_t size() const { return nodes_.size(); }
    Node& node(std::size_t i) { return nodes_[i]; }
    const Node& node(std::size_t i) const { return nodes_[i]; }
    bool alive(std::size_t i) const { return alive_[i] != 0; }
    const std::vector<RobotPose>& poses() const { return poses_; }
    const std::vector<std::vector<std::size_t>>& graph() const { return graph_; }

    /// Removes a robot. Active tuples it held, and StoreRoutes addressed to
    /// it still on the air, count as lost.
    void kill(std::size_t i);
    void set_pose(std::size_t i, const RobotPose& pose);
    /// Queues an event for detection by the nearest robot in range.
    void add_event(const EventRecord& event);
    /// Emits a query from robot `origin` at the current clock.
    QueryId issue_query(std::size_t origin, const QuerySpec& spec);
    /// User erase of `tau` issued by robot `origin`.
    void erase(std::size_t origin, const TupleId& tau);

    /// Every active tuple instance: storage, routing queues, queued and
    /// airborne StoreRoutes.
    std::vector<ActiveInstance> active_instances() const;
    /// The latest version of every tuple that was written and not since
    /// discarded, erased or lost.
    const std::map<TupleId, Tuple>& ledger() const { return ledger_; }
    const std::vector<QueryResult>& query_results() const { return results_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    std::size_t pending_events() const { return pending_.size(); }

private:
    struct Airborne {
        std::size_t sender;
        Message message;
        std::vector<std::size_t> receivers;
    };

    void move_robots();
    void rebuild_graph();
    void deliver_and_step();
    void transmit_all();
    void generate_workload();
    void record_metrics();
    void collect_events(std::size_t i);
    void collect_all_events();
    void collect_completed();
    QuerySpec draw_query();
    void advance_phase();

    SimConfig cfg_;
    WorldOptions opts_;
    Arena arena_;
    Step clock_ = 0;
    RunPhase phase_ = RunPhase::generating;
    Step phase_started_ = 0;

    std::vector<Node> nodes_;
    std::vector<RobotPose> poses_;
    std::vector<std::uint8_t> alive_;
    std::vector<Delta> beacon_delta_;
    std::vector<std::vector<std::size_t>> graph_;
    std::vector<Airborne> air_;

    std::mt19937_64 mobility_rng_;
    std::mt19937_64 event_rng_;
    std::mt19937_64 query_rng_;

    std::size_t target_events_ = 0;
    std::vector<EventRecord> pending_;

    MetricsLog log_;
    std::map<TupleId, Tuple> ledger_;
    std::set<TupleId> seen_;
    std::set<TupleId> user_erased_;
    std::map<TupleId, Step> unsettled_;     // new tuple → step written
    std::map<TupleId, std::uint32_t> hops_; // StoreRoute transmissions so far
    std::map<QueryId, std::size_t> query_index_;
    std::map<QueryId, QueryOutcome> oracle_;
    std::map<QueryId, std::vector<TupleId>> expected_;
    std::vector<QueryResult> results_;
    std::vector<TraceRow> trace_;

    // Conservation counters over tuple versions.
    std::size_t versions_written_ = 0;
    std::size_t versions_removed_ = 0; // discarded, erased, superseded
};

} // namespace swarmmesh
