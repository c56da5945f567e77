#include "swarmmesh/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

namespace swarmmesh {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

enum Stream : std::uint64_t { placement = 1, mobility = 2, events = 3, queries = 4, protocol = 1000 };

const char* kind_name(NodeEvent::Kind k)
{
    switch (k) {
    case NodeEvent::Kind::written: return "written";
    case NodeEvent::Kind::stored: return "stored";
    case NodeEvent::Kind::discarded: return "discarded";
    case NodeEvent::Kind::erased: return "erased";
    case NodeEvent::Kind::superseded: return "superseded";
    case NodeEvent::Kind::replica_stored: return "replica_stored";
    case NodeEvent::Kind::replica_dropped: return "replica_dropped";
    case NodeEvent::Kind::replica_activated: return "replica_activated";
    case NodeEvent::Kind::slave_assigned: return "slave_assigned";
    }
    return "?";
}

bool same_version(const std::map<TupleId, Tuple>& ledger, const Tuple& t)
{
    auto it = ledger.find(t.tau());
    return it != ledger.end() && it->second.timestamp == t.timestamp;
}

} // namespace

Arena make_arena(const SimConfig& cfg)
{
    return Arena{arena_side(cfg.n_robots, cfg.density) / 2.0};
}

std::vector<std::vector<std::size_t>> build_neighbor_graph(std::span<const Vec2> positions, double range)
{
    std::vector<std::vector<std::size_t>> g(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j)
            if (distance(positions[i], positions[j]) <= range) {
                g[i].push_back(j);
                g[j].push_back(i);
            }
    for (auto& row : g)
        std::sort(row.begin(), row.end());
    return g;
}

bool is_connected(const std::vector<std::vector<std::size_t>>& graph)
{
    if (graph.empty())
        return true;
    std::vector<bool> seen(graph.size(), false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (std::size_t v : graph[u])
            if (!seen[v]) {
                seen[v] = true;
                ++reached;
                q.push(v);
            }
    }
    return reached == graph.size();
}

RobotPose move_diffusion(const RobotPose& pose, std::mt19937_64& rng, double dt, const Arena& arena,
                         double heading_jitter)
{
    if (pose.speed == 0.0)
        return pose;
    RobotPose next = pose;
    std::uniform_real_distribution<double> jitter(-heading_jitter, heading_jitter);
    next.heading += jitter(rng);
    next.position.x += pose.speed * dt * std::cos(next.heading);
    next.position.y += pose.speed * dt * std::sin(next.heading);

    const double h = arena.half;
    if (next.position.x > h) {
        next.position.x = 2 * h - next.position.x;
        next.heading = std::numbers::pi - next.heading;
    } else if (next.position.x < -h) {
        next.position.x = -2 * h - next.position.x;
        next.heading = std::numbers::pi - next.heading;
    }
    if (next.position.y > h) {
        next.position.y = 2 * h - next.position.y;
        next.heading = -next.heading;
    } else if (next.position.y < -h) {
        next.position.y = -2 * h - next.position.y;
        next.heading = -next.heading;
    }
    next.position.x = std::clamp(next.position.x, -h, h);
    next.position.y = std::clamp(next.position.y, -h, h);
    next.heading = std::remainder(next.heading, 2 * std::numbers::pi);
    return next;
}

std::optional<std::size_t> elect_writer(Vec2 event, std::span<const Vec2> positions,
                                        std::span<const std::uint8_t> alive, double sensing_range)
{
    std::optional<std::size_t> best;
    double best_d = 0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!alive[i])
            continue;
        const double d = distance(event, positions[i]);
        if (d > sensing_range)
            continue;
        if (!best || d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

std::size_t event_target(const SimConfig& cfg)
{
    const double exact = cfg.load_factor * cfg.n_robots * cfg.storage_S;
    // Absorb representation error so that 0.6 · 500 is 300, not 301.
    return static_cast<std::size_t>(std::ceil(exact - 1e-9));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

World::World(SimConfig cfg, WorldOptions opts)
    : cfg_(std::move(cfg)), opts_(opts), arena_(make_arena(cfg_)),
      mobility_rng_(derive_seed(cfg_.rng_seed, Stream::mobility)),
      event_rng_(derive_seed(cfg_.rng_seed, Stream::events)),
      query_rng_(derive_seed(cfg_.rng_seed, Stream::queries))
{
    const NodeParams params = node_params(cfg_);
    std::mt19937_64 place(derive_seed(cfg_.rng_seed, Stream::placement));
    std::uniform_real_distribution<double> coord(-arena_.half, arena_.half);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);

    nodes_.reserve(cfg_.n_robots);
    for (std::uint32_t i = 0; i < cfg_.n_robots; ++i) {
        nodes_.emplace_back(RobotId{i}, params, derive_seed(cfg_.rng_seed, Stream::protocol + i));
        RobotPose p;
        p.position.x = coord(place);
        p.position.y = coord(place);
        p.heading = angle(place);
        p.speed = cfg_.speed;
        poses_.push_back(p);
    }
    alive_.assign(cfg_.n_robots, 1);
    beacon_delta_.assign(cfg_.n_robots, 0);
    target_events_ = opts_.generate_events ? event_target(cfg_) : 0;
    rebuild_graph();
}

bool World::finished() const
{
    return phase_ == RunPhase::done;
}

void World::run()
{
    while (!finished())
        step();
}

void World::step()
{
    if (finished())
        return;
    move_robots();
    rebuild_graph();
    deliver_and_step();
    collect_all_events();
    transmit_all();
    collect_all_events();
    generate_workload();
    collect_all_events();
    collect_completed();
    record_metrics();
    advance_phase();
    ++clock_;
}

void World::move_robots()
{
    const double dt = cfg_.step_seconds;
    for (std::size_t i = 0; i < poses_.size(); ++i)
        if (alive_[i])
            poses_[i] = move_diffusion(poses_[i], mobility_rng_, dt, arena_, cfg_.heading_jitter);
}

void World::rebuild_graph()
{
    std::vector<Vec2> pos;
    pos.reserve(poses_.size());
    for (const auto& p : poses_)
        pos.push_back(p.position);
    graph_ = build_neighbor_graph(pos, cfg_.comm_range_C);
    for (std::size_t i = 0; i < graph_.size(); ++i) {
        if (!alive_[i]) {
            graph_[i].clear();
            continue;
        }
        std::erase_if(graph_[i], [&](std::size_t j) { return !alive_[j]; });
    }
}

void World::deliver_and_step()
{
    std::vector<std::vector<Packet>> inbox(nodes_.size());
    for (const auto& a : air_)
        for (std::size_t r : a.receivers)
            if (alive_[r])
                inbox[r].push_back(Packet{RobotId{static_cast<std::uint32_t>(a.sender)}, a.message});
    air_.clear();

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!alive_[i])
            continue;
        std::vector<NeighborInfo> nbrs;
        nbrs.reserve(graph_[i].size());
        for (std::size_t j : graph_[i])
            nbrs.push_back(NeighborInfo{RobotId{static_cast<std::uint32_t>(j)}, beacon_delta_[j],
                                        distance(poses_[i].position, poses_[j].position)});
        nodes_[i].step(clock_, inbox[i], std::move(nbrs));
    }
}

void World::transmit_all()
{
    std::vector<std::uint32_t> bytes(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!alive_[i])
            continue;
        auto sent = nodes_[i].transmit();
        bytes[i] = static_cast<std::uint32_t>(nodes_[i].out_queue().bytes_sent_this_step());
        log_.max_step_bytes = std::max<std::size_t>(log_.max_step_bytes, bytes[i]);
        for (auto& m : sent) {
            if (const auto* b = std::get_if<Beacon>(&m))
                beacon_delta_[i] = b->delta;
            else if (const auto* s = std::get_if<StoreRoute>(&m)) {
                if (auto it = hops_.find(s->tuple.tau()); it != hops_.end())
                    ++it->second;
            }
            air_.push_back(Airborne{i, std::move(m), graph_[i]});
        }
    }
    log_.bandwidth.push_back(std::move(bytes));
}

void World::add_event(const EventRecord& event)
{
    pending_.push_back(event);
}

void World::generate_workload()
{
    const double dt = cfg_.step_seconds;
    if (phase_ == RunPhase::generating && cfg_.event_rate > 0) {
        std::poisson_distribution<int> count(cfg_.event_rate * dt);
        std::uniform_real_distribution<double> coord(-arena_.half, arena_.half);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::uint32_t> type(0, cfg_.n_event_types - 1);
        std::uniform_int_distribution<std::int64_t> value(-1000, 1000);
        const int n = count(event_rng_);
        for (int k = 0; k < n && log_.events_generated < target_events_; ++k) {
            EventRecord e;
            if (cfg_.event_field == EventField::uniform) {
                e.position = {coord(event_rng_), coord(event_rng_)};
            } else {
                do {
                    const double r = cfg_.disc_radius * std::sqrt(unit(event_rng_));
                    const double a = 2 * std::numbers::pi * unit(event_rng_);
                    e.position = {r * std::cos(a), r * std::sin(a)};
                } while (!arena_.contains(e.position));
            }
            e.event_type = type(event_rng_);
            e.value = value(event_rng_);
            pending_.push_back(e);
            ++log_.events_generated;
        }
    }

    if (!pending_.empty()) {
        std::vector<Vec2> pos;
        pos.reserve(poses_.size());
        for (const auto& p : poses_)
            pos.push_back(p.position);
        std::vector<EventRecord> still;
        for (auto& e : pending_) {
            const auto w = elect_writer(e.position, pos, alive_, cfg_.sensing_range);
            if (!w) {
                still.push_back(e);
                continue;
            }
            e.detected_at = clock_;
            nodes_[*w].put(e, clock_);
            collect_events(*w);
        }
        pending_ = std::move(still);
    }

    if (phase_ != RunPhase::draining && opts_.generate_queries && cfg_.query_rate > 0) {
        std::poisson_distribution<int> count(cfg_.query_rate * dt);
        const int n = count(query_rng_);
        for (int k = 0; k < n; ++k) {
            std::vector<std::size_t> live;
            for (std::size_t i = 0; i < alive_.size(); ++i)
                if (alive_[i])
                    live.push_back(i);
            if (live.empty())
                break;
            std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
            const std::size_t origin = live[pick(query_rng_)];
            issue_query(origin, draw_query());
        }
    }
}

QuerySpec World::draw_query()
{
    std::uniform_real_distribution<double> coord(-arena_.half, arena_.half);
    std::uniform_int_distribution<std::size_t> radius(0, cfg_.query_radii.size() - 1);
    const Vec2 center{coord(query_rng_), coord(query_rng_)};
    const double r = cfg_.query_radii[radius(query_rng_)];
    if (cfg_.query_mix == QueryMix::spatial_get)
        return SpatialRange{center, r, QueryOp::get};

    std::uniform_int_distribution<int> op(0, 5);
    std::bernoulli_distribution spatial(0.5);
    const auto o = static_cast<QueryOp>(op(query_rng_));
    if (spatial(query_rng_))
        return SpatialRange{center, r, o};
    std::uniform_int_distribution<Rho> k(0, max_hash(cfg_.hash_mode, cfg_));
    std::uniform_int_distribution<std::uint32_t> width(0, 20);
    return KeyRange{k(query_rng_), width(query_rng_), o};
}

QueryId World::issue_query(std::size_t origin, const QuerySpec& spec)
{
    collect_all_events();
    const QueryId qid = nodes_[origin].query(spec, clock_);
    collect_events(origin);

    std::vector<Tuple> live;
    live.reserve(ledger_.size());
    for (const auto& [_, t] : ledger_)
        live.push_back(t);
    std::vector<ReplyPayload> parts;
    if (auto p = match_local(spec, live))
        parts.push_back(std::move(*p));
    oracle_[qid] = combine_at_source(op_of(spec), parts);

    QueryRecord rec;
    rec.qid = qid;
    rec.op = op_of(spec);
    rec.emit_step = clock_;
    if (const auto* s = std::get_if<SpatialRange>(&spec)) {
        rec.spatial = true;
        rec.radius = s->r;
    } else {
        rec.spatial = false;
    }
    if (rec.op == QueryOp::get) {
        std::vector<TupleId> expected;
        for (const auto& t : live)
            if (matches(spec, t))
                expected.push_back(t.tau());
        rec.replies_expected = expected.size();
        expected_[qid] = std::move(expected);
    }
    query_index_[qid] = log_.query_events.size();
    log_.query_events.push_back(rec);
    return qid;
}

void World::erase(std::size_t origin, const TupleId& tau)
{
    user_erased_.insert(tau);
    nodes_[origin].erase(tau, clock_);
    collect_events(origin);
}

void World::collect_completed()
{
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!alive_[i])
            continue;
        for (auto& cq : nodes_[i].take_completed(clock_)) {
            auto idx = query_index_.find(cq.qid);
            if (idx == query_index_.end())
                continue;
            auto& rec = log_.query_events[idx->second];
            rec.completed = true;
            rec.last_reply_step = cq.last_reply;
            if (auto ex = expected_.find(cq.qid); ex != expected_.end()) {
                std::set<TupleId> returned;
                for (const auto& t : cq.outcome.tuples)
                    returned.insert(t.tau());
                std::size_t got = 0;
                for (const auto& tau : ex->second)
                    got += returned.contains(tau) ? 1 : 0;
                rec.replies_received = got;
                expected_.erase(ex);
            }
            auto oracle = oracle_.extract(cq.qid);
            results_.push_back(QueryResult{std::move(cq), oracle ? std::move(oracle.mapped()) : QueryOutcome{}});
        }
    }
}

void World::collect_all_events()
{
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (alive_[i])
            collect_events(i);
}

void World::collect_events(std::size_t i)
{
    for (const auto& ev : nodes_[i].take_events()) {
        const Tuple& t = ev.tuple;
        if (opts_.trace)
            trace_.push_back(TraceRow{ev.step, RobotId{static_cast<std::uint32_t>(i)}, kind_name(ev.kind),
                                      to_string(t.tau()) + " rho=" + std::to_string(t.rho())});
        switch (ev.kind) {
        case NodeEvent::Kind::written: {
            ++versions_written_;
            const bool fresh = seen_.insert(t.tau()).second;
            log_.writes.push_back(WriteRecord{t.tau(), t.rho(), ev.step, fresh});
            if (fresh) {
                log_.rho_samples.push_back(t.rho());
                unsettled_[t.tau()] = ev.step;
                hops_[t.tau()] = 0;
            }
            ledger_[t.tau()] = t;
            break;
        }
        case NodeEvent::Kind::stored:
            if (auto it = unsettled_.find(t.tau()); it != unsettled_.end()) {
                log_.store_settled.push_back(
                    SettleRecord{t.tau(), t.rho(), ev.step - it->second, hops_[t.tau()]});
                unsettled_.erase(it);
                hops_.erase(t.tau());
            }
            break;
        case NodeEvent::Kind::discarded:
            ++versions_removed_;
            log_.discards.push_back(DiscardRecord{t.tau(), t.rho(), ev.step});
            if (same_version(ledger_, t))
                ledger_.erase(t.tau());
            unsettled_.erase(t.tau());
            hops_.erase(t.tau());
            break;
        case NodeEvent::Kind::erased:
        case NodeEvent::Kind::superseded:
            ++versions_removed_;
            log_.erases.push_back(EraseRecord{t.tau(), ev.step, user_erased_.contains(t.tau())});
            if (same_version(ledger_, t))
                ledger_.erase(t.tau());
            break;
        case NodeEvent::Kind::replica_activated: {
            ++log_.restored;
            auto it = ledger_.find(t.tau());
            if (it == ledger_.end() || it->second.timestamp < t.timestamp)
                ledger_[t.tau()] = t;
            break;
        }
        case NodeEvent::Kind::replica_stored:
        case NodeEvent::Kind::replica_dropped:
        case NodeEvent::Kind::slave_assigned:
            break;
        }
    }
}

void World::kill(std::size_t i)
{
    if (!alive_[i])
        return;
    collect_events(i);
    auto lose = [&](const Tuple& t) {
        ++log_.lost;
        if (same_version(ledger_, t))
            ledger_.erase(t.tau());
    };
    const Node& n = nodes_[i];
    for (const auto& t : n.storage())
        lose(t);
    for (const auto& t : n.routing_queue().items())
        lose(t);
    for (const auto& m : n.out_queue().pending())
        if (const auto* s = std::get_if<StoreRoute>(&m))
            lose(s->tuple);
    std::erase_if(air_, [&](const Airborne& a) {
        const auto* s = std::get_if<StoreRoute>(&a.message);
        if (!s || s->dest.value != i)
            return false;
        lose(s->tuple);
        return true;
    });
    alive_[i] = 0;
    graph_[i].clear();
    for (auto& row : graph_)
        std::erase(row, i);
}

void World::set_pose(std::size_t i, const RobotPose& pose)
{
    poses_[i] = pose;
    rebuild_graph();
}

std::vector<ActiveInstance> World::active_instances() const
{
    std::vector<ActiveInstance> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!alive_[i])
            continue;
        const RobotId holder{static_cast<std::uint32_t>(i)};
        const Node& n = nodes_[i];
        for (const auto& t : n.storage())
            out.push_back(ActiveInstance{t.tau(), t.timestamp, holder});
        for (const auto& t : n.routing_queue().items())
            out.push_back(ActiveInstance{t.tau(), t.timestamp, holder});
        for (const auto& m : n.out_queue().pending())
            if (const auto* s = std::get_if<StoreRoute>(&m))
                out.push_back(ActiveInstance{s->tuple.tau(), s->tuple.timestamp, holder});
    }
    for (const auto& a : air_)
        if (const auto* s = std::get_if<StoreRoute>(&a.message); s && alive_[s->dest.value])
            out.push_back(ActiveInstance{s->tuple.tau(), s->tuple.timestamp, s->dest});
    return out;
}

void World::record_metrics()
{
    std::vector<Delta> deltas;
    std::size_t stored = 0;
    std::size_t routed = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!alive_[i])
            continue;
        const Node& n = nodes_[i];
        deltas.push_back(n.delta());
        stored += n.storage().size();
        routed += n.routing_queue().size();
        log_.max_occupancy = std::max(log_.max_occupancy, n.occupancy());
    }
    log_.delta_samples.push_back(std::move(deltas));
    if (stored + routed > 0)
        log_.stored_routed.push_back(StoredRouted{clock_, stored, routed});

    if (!opts_.audit)
        return;
    const auto instances = active_instances();
    if (!consistency_check(instances).empty())
        log_.consistency_violations.push_back(clock_);
    if (versions_written_ + log_.restored != instances.size() + versions_removed_ + log_.lost)
        log_.conservation_violations.push_back(clock_);
}

void World::advance_phase()
{
    const Step next = clock_ + 1;
    switch (phase_) {
    case RunPhase::generating:
        if (log_.events_generated >= target_events_) {
            phase_ = RunPhase::quiescent;
            phase_started_ = next;
        }
        break;
    case RunPhase::quiescent:
        if (next - phase_started_ >= cfg_.quiescence_steps) {
            phase_ = RunPhase::draining;
            phase_started_ = next;
        }
        break;
    case RunPhase::draining:
        if (next - phase_started_ >= cfg_.collection_window)
            phase_ = RunPhase::done;
        break;
    case RunPhase::done:
        break;
    }
    if (next >= cfg_.max_steps)
        phase_ = RunPhase::done;
    log_.events_pending = pending_.size();
}

} // namespace swarmmesh
