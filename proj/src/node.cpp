#include "swarmmesh/node.hpp"

#include <algorithm>
#include <cstdlib>
#include <tuple>

namespace swarmmesh {

namespace {

/// Order used for both routing priority and discard choice.
bool less_valuable(const Tuple& a, const Tuple& b)
{
    return std::tuple(a.rho(), a.timestamp, a.tau()) < std::tuple(b.rho(), b.timestamp, b.tau());
}

} // namespace

Delta compute_delta(std::uint32_t free_slots, std::size_t neighbor_count)
{
    if (neighbor_count == 0)
        return 1;
    return static_cast<Delta>(free_slots * neighbor_count);
}

std::size_t RoutingQueue::top_index() const
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < items_.size(); ++i) {
        const Tuple& a = items_[i];
        const Tuple& b = items_[best];
        if (a.rho() != b.rho() ? a.rho() > b.rho()
                               : std::tuple(a.timestamp, a.tau()) < std::tuple(b.timestamp, b.tau()))
            best = i;
    }
    return best;
}

const Tuple& RoutingQueue::top() const
{
    return items_[top_index()];
}

Tuple RoutingQueue::pop()
{
    const std::size_t i = top_index();
    Tuple t = items_[i];
    items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(i));
    return t;
}

NodeParams node_params(const SimConfig& cfg)
{
    NodeParams p;
    p.storage_S = cfg.storage_S;
    p.memory_M = cfg.memory_M;
    p.bandwidth_cap = cfg.bandwidth_cap;
    p.query_cache_size = cfg.query_cache_size;
    p.reply_cache_size = cfg.reply_cache_size;
    p.collection_window = cfg.collection_window;
    p.hashing = hash_settings(cfg);
    p.replication = cfg.replication_enabled;
    p.safe_radius = cfg.safe_radius;
    p.heartbeat_period = cfg.heartbeat_period;
    p.heartbeat_timeout = cfg.heartbeat_timeout;
    return p;
}

Node::Node(RobotId me, NodeParams params, std::uint64_t seed)
    : me_(me), params_(params), rng_(seed), query_cache_(params.query_cache_size),
      seen_replies_(params.reply_cache_size)
{
}

void Node::step(Step now, std::span<const Packet> delivered, std::vector<NeighborInfo> neighbors)
{
    begin_step(now, std::move(neighbors));
    for (const auto& p : delivered)
        receive(p);
    end_step();
}

void Node::begin_step(Step now, std::vector<NeighborInfo> neighbors)
{
    now_ = now;
    neighbors_ = std::move(neighbors);
    std::sort(neighbors_.begin(), neighbors_.end(),
              [](const NeighborInfo& a, const NeighborInfo& b) { return a.id < b.id; });
    for (auto& m : out_.pending()) {
        if (auto* b = std::get_if<Beacon>(&m)) {
            b->delta = delta();
            return;
        }
    }
    out_.push(Beacon{me_, delta()});
}

void Node::receive(const Packet& packet)
{
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, QueryFlood>)
                handle_query_flood(m);
            else if constexpr (std::is_same_v<T, Reply>)
                forward_reply(m);
            else if constexpr (std::is_same_v<T, StoreRoute>) {
                if (m.dest == me_)
                    accept_tuple(m.tuple);
            } else if constexpr (std::is_same_v<T, EraseFlood>)
                handle_erase(m);
            else if constexpr (std::is_same_v<T, Heartbeat>)
                handle_heartbeat(packet.sender, m);
            else if constexpr (std::is_same_v<T, ReplicaAssign>)
                handle_assign(m);
            else if constexpr (std::is_same_v<T, ReplicaKill>)
                handle_kill(m);
            // Beacons feed the harness' neighbor snapshot, nothing to do here.
        },
        packet.message);
}

void Node::end_step()
{
    route_step();
    address_optimize();
    replication_tick();
}

std::vector<Message> Node::transmit()
{
    auto& q = out_.pending();
    for (auto it = q.begin(); it != q.end();) {
        const auto* s = std::get_if<StoreRoute>(&*it);
        if (s && !neighbor(s->dest)) {
            routing_.push(s->tuple);
            it = q.erase(it);
        } else {
            ++it;
        }
    }
    enforce_capacity();
    for (auto& m : q)
        if (auto* b = std::get_if<Beacon>(&m))
            b->delta = delta();
    return out_.flush(params_.bandwidth_cap);
}

TupleId Node::put(const EventRecord& event, Step now)
{
    now_ = std::max(now_, now);
    const Key key = make_key(me_, write_count_++, event, params_.hashing);
    const Tuple t{key, event.value, event.position, now};
    emit(NodeEvent::Kind::written, t);
    flood_erase(key.tau, now, NodeEvent::Kind::erased);
    accept_tuple(t);
    return key.tau;
}

void Node::put_version(const TupleId& tau, const EventRecord& event, Step now)
{
    now_ = std::max(now_, now);
    const Tuple t{Key{tau, hash_event(event, params_.hashing)}, event.value, event.position, now};
    emit(NodeEvent::Kind::written, t);
    flood_erase(tau, now, NodeEvent::Kind::superseded);
    accept_tuple(t);
}

void Node::erase(const TupleId& tau, Step now)
{
    now_ = std::max(now_, now);
    flood_erase(tau, now + 1, NodeEvent::Kind::erased);
}

void Node::flood_erase(const TupleId& tau, Step before, NodeEvent::Kind kind)
{
    const QueryId qid{me_, query_count_++};
    query_cache_.insert(qid, 0);
    out_.push(EraseFlood{qid, 0, tau, before});
    remove_versions(tau, before, kind);
}

QueryId Node::query(const QuerySpec& spec, Step now)
{
    now_ = std::max(now_, now);
    const QueryId qid{me_, query_count_++};
    query_cache_.insert(qid, 0);
    out_.push(QueryFlood{qid, 0, spec});

    PendingQuery pending{spec, now, std::nullopt, {}};
    const auto active = active_tuples();
    const bool any = std::any_of(active.begin(), active.end(), [&](const Tuple& t) { return matches(spec, t); });
    if (any) {
        if (auto payload = match_local(spec, active)) {
            const ReplyId rid{me_, reply_count_++};
            seen_replies_.insert(rid, true);
            pending.replies.emplace(rid, std::move(*payload));
            pending.last_reply = now;
        }
    }
    pending_queries_.emplace(qid, std::move(pending));
    return qid;
}

std::vector<CompletedQuery> Node::take_completed(Step now)
{
    std::vector<CompletedQuery> out;
    for (auto it = pending_queries_.begin(); it != pending_queries_.end();) {
        if (now - it->second.emitted < params_.collection_window) {
            ++it;
            continue;
        }
        std::vector<ReplyPayload> payloads;
        payloads.reserve(it->second.replies.size());
        for (const auto& [_, p] : it->second.replies)
            payloads.push_back(p);
        out.push_back(CompletedQuery{it->first, it->second.spec, it->second.emitted, it->second.last_reply,
                                     combine_at_source(op_of(it->second.spec), payloads)});
        it = pending_queries_.erase(it);
    }
    return out;
}

std::uint32_t Node::free_slots() const
{
    const std::size_t used = storage_.size() + replicas_.size();
    return used >= params_.storage_S ? 0 : static_cast<std::uint32_t>(params_.storage_S - used);
}

Delta Node::delta() const
{
    return compute_delta(free_slots(), neighbors_.size());
}

const NeighborInfo* Node::neighbor(RobotId id) const
{
    auto it = std::lower_bound(neighbors_.begin(), neighbors_.end(), id,
                               [](const NeighborInfo& n, RobotId v) { return n.id < v; });
    return it != neighbors_.end() && it->id == id ? &*it : nullptr;
}

std::vector<Tuple> Node::active_tuples() const
{
    std::vector<Tuple> out = storage_;
    out.insert(out.end(), routing_.items().begin(), routing_.items().end());
    return out;
}

bool Node::holds_active(const TupleId& tau) const
{
    auto same = [&](const Tuple& t) { return t.tau() == tau; };
    return std::any_of(storage_.begin(), storage_.end(), same) ||
           std::any_of(routing_.items().begin(), routing_.items().end(), same);
}

std::optional<std::uint32_t> Node::cached_hop(const QueryId& qid) const
{
    if (const auto* h = query_cache_.find(qid))
        return *h;
    return std::nullopt;
}

void Node::emit(NodeEvent::Kind kind, const Tuple& t, RobotId peer)
{
    events_.push_back(NodeEvent{kind, t, now_, peer});
}

std::vector<NodeEvent> Node::take_events()
{
    return std::exchange(events_, {});
}

void Node::inject_stored(const Tuple& t)
{
    store(t);
}

void Node::store(const Tuple& t)
{
    storage_.push_back(t);
    emit(NodeEvent::Kind::stored, t);
    if (params_.replication)
        masters_.emplace(t.tau(), MasterRole{});
}

void Node::drop_master_role(const TupleId& tau)
{
    auto it = masters_.find(tau);
    if (it == masters_.end())
        return;
    if (it->second.slave)
        out_.push(ReplicaKill{me_, *it->second.slave, tau});
    masters_.erase(it);
}

AcceptResult Node::accept_tuple(const Tuple& t)
{
    // Newer version wins; an incoming stale version is dropped outright.
    for (const auto* pool : {&storage_, &routing_.items()}) {
        for (const auto& held : *pool) {
            if (held.tau() == t.tau() && held.timestamp >= t.timestamp) {
                emit(NodeEvent::Kind::superseded, t);
                return AcceptResult{Disposition::superseded, std::nullopt};
            }
        }
    }
    remove_versions(t.tau(), t.timestamp, NodeEvent::Kind::superseded);

    // An active copy arriving here makes any inactive copy of it moot.
    if (auto it = std::find_if(replicas_.begin(), replicas_.end(), [&](const Tuple& r) { return r.tau() == t.tau(); });
        it != replicas_.end()) {
        emit(NodeEvent::Kind::replica_dropped, *it);
        replicas_.erase(it);
        slaves_.erase(t.tau());
    }

    AcceptResult result;
    if (can_hold(delta(), t.rho()) && storage_.size() < params_.storage_S) {
        store(t);
        result.disposition = Disposition::stored;
    } else {
        routing_.push(t);
        result.disposition = Disposition::queued;
    }
    result.victim = enforce_capacity();
    if (result.victim && result.victim->tau() == t.tau() && result.victim->timestamp == t.timestamp)
        result.disposition = Disposition::discarded;
    return result;
}

std::optional<Tuple> Node::enforce_capacity()
{
    std::optional<Tuple> victim;
    while (occupancy() > params_.memory_M) {
        if (!replicas_.empty()) {
            auto it = std::min_element(replicas_.begin(), replicas_.end(), less_valuable);
            victim = *it;
            emit(NodeEvent::Kind::replica_dropped, *it);
            slaves_.erase(it->tau());
            replicas_.erase(it);
            continue;
        }
        auto s = std::min_element(storage_.begin(), storage_.end(), less_valuable);
        auto r = std::min_element(routing_.items().begin(), routing_.items().end(), less_valuable);
        const bool from_storage =
            s != storage_.end() && (r == routing_.items().end() || less_valuable(*s, *r));
        if (from_storage) {
            victim = *s;
            const TupleId tau = s->tau();
            storage_.erase(s);
            drop_master_role(tau);
        } else {
            victim = *r;
            routing_.items().erase(r);
        }
        emit(NodeEvent::Kind::discarded, *victim);
    }
    return victim;
}

void Node::send_store_route(RobotId dest, const Tuple& t)
{
    out_.push(StoreRoute{dest, t});
}

std::optional<StoreRoute> Node::route_step()
{
    if (routing_.empty() || out_.has_store_route())
        return std::nullopt;
    const Tuple t = routing_.top();
    if (can_hold(delta(), t.rho()) && storage_.size() < params_.storage_S) {
        routing_.pop();
        store(t);
        return std::nullopt;
    }
    if (neighbors_.empty())
        return std::nullopt;

    std::vector<RobotId> candidates;
    for (const auto& n : neighbors_)
        if (can_hold(n.delta, t.rho()))
            candidates.push_back(n.id);

    RobotId dest;
    if (!candidates.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        dest = candidates[pick(rng_)];
    } else {
        // neighbors_ is sorted by id, so the first maximum is the lowest id.
        dest = std::max_element(neighbors_.begin(), neighbors_.end(),
                                [](const NeighborInfo& a, const NeighborInfo& b) { return a.delta < b.delta; })
                   ->id;
    }
    routing_.pop();
    send_store_route(dest, t);
    return StoreRoute{dest, t};
}

std::optional<StoreRoute> Node::address_optimize()
{
    if (!routing_.empty() || 2 * storage_.size() < params_.storage_S || out_.has_store_route() ||
        neighbors_.empty())
        return std::nullopt;

    const std::int64_t mine = delta();
    std::optional<std::tuple<std::int64_t, RobotId, TupleId>> best;
    for (const auto& t : storage_) {
        const std::int64_t rho = t.rho();
        const std::int64_t own_gap = std::llabs(mine - rho);
        for (const auto& n : neighbors_) {
            if (!can_hold(n.delta, t.rho()))
                continue;
            const std::int64_t gap = std::int64_t{n.delta} - rho;
            if (gap >= own_gap)
                continue;
            const auto cand = std::tuple(gap, n.id, t.tau());
            if (!best || cand < *best)
                best = cand;
        }
    }
    if (!best)
        return std::nullopt;

    const auto& [gap, dest, tau] = *best;
    auto it = std::find_if(storage_.begin(), storage_.end(), [&](const Tuple& t) { return t.tau() == tau; });
    const Tuple t = *it;
    storage_.erase(it);
    drop_master_role(tau);
    send_store_route(dest, t);
    return StoreRoute{dest, t};
}

void Node::send_reply(const QueryId& qid, std::uint32_t hop, ReplyPayload payload)
{
    const ReplyId rid{me_, reply_count_++};
    seen_replies_.insert(rid, true);
    out_.push(Reply{qid, rid, hop, std::move(payload)});
}

void Node::handle_query_flood(const QueryFlood& q)
{
    if (auto* hop = query_cache_.find(q.qid)) {
        *hop = std::min(*hop, q.hop + 1);
        return;
    }
    const std::uint32_t hop = q.hop + 1;
    query_cache_.insert(q.qid, hop);
    out_.push(QueryFlood{q.qid, hop, q.spec});

    std::vector<Tuple> hits;
    for (const auto& t : active_tuples())
        if (matches(q.spec, t))
            hits.push_back(t);
    if (hits.empty())
        return;

    if (op_of(q.spec) == QueryOp::get) {
        const std::size_t chunk = std::max<std::size_t>(1, tuples_per_reply(params_.bandwidth_cap));
        for (std::size_t i = 0; i < hits.size(); i += chunk) {
            const auto end = std::min(hits.size(), i + chunk);
            send_reply(q.qid, hop,
                       TuplesPayload{std::vector<Tuple>(hits.begin() + static_cast<std::ptrdiff_t>(i),
                                                        hits.begin() + static_cast<std::ptrdiff_t>(end))});
        }
        return;
    }
    if (auto payload = match_local(q.spec, hits))
        send_reply(q.qid, hop, std::move(*payload));
}

void Node::forward_reply(const Reply& r)
{
    if (seen_replies_.contains(r.reply_id))
        return;
    seen_replies_.insert(r.reply_id, true);

    if (r.qid.origin == me_) {
        auto it = pending_queries_.find(r.qid);
        if (it != pending_queries_.end() && it->second.replies.emplace(r.reply_id, r.payload).second)
            it->second.last_reply = now_;
        return;
    }

    const auto* hop = query_cache_.find(r.qid);
    if (!hop || r.hop_stamp < *hop)
        return;

    Reply fwd = r;
    fwd.hop_stamp = *hop;

    // Min and max are idempotent, so a partial folds into this robot's own
    // pending reply to the same query. Only an own reply is safe to grow:
    // nobody downstream has seen its id yet.
    const bool is_min = std::holds_alternative<MinPayload>(fwd.payload);
    const bool is_max = std::holds_alternative<MaxPayload>(fwd.payload);
    if (is_min || is_max) {
        for (auto& m : out_.pending()) {
            auto* pending = std::get_if<Reply>(&m);
            if (!pending || pending->qid != fwd.qid || pending->reply_id.replier != me_)
                continue;
            if (auto* pm = std::get_if<MinPayload>(&pending->payload); pm && is_min) {
                pm->v = std::min(pm->v, std::get<MinPayload>(fwd.payload).v);
                return;
            }
            if (auto* pm = std::get_if<MaxPayload>(&pending->payload); pm && is_max) {
                pm->v = std::max(pm->v, std::get<MaxPayload>(fwd.payload).v);
                return;
            }
        }
    }
    out_.push(std::move(fwd));
}

void Node::remove_versions(const TupleId& tau, Step before, NodeEvent::Kind kind)
{
    auto doomed = [&](const Tuple& t) { return t.tau() == tau && t.timestamp < before; };

    for (auto it = storage_.begin(); it != storage_.end();) {
        if (doomed(*it)) {
            emit(kind, *it);
            drop_master_role(it->tau());
            it = storage_.erase(it);
        } else {
            ++it;
        }
    }
    for (const auto& t : routing_.remove_if(doomed))
        emit(kind, t);

    auto& q = out_.pending();
    for (auto it = q.begin(); it != q.end();) {
        const auto* s = std::get_if<StoreRoute>(&*it);
        if (s && doomed(s->tuple)) {
            emit(kind, s->tuple);
            it = q.erase(it);
        } else {
            ++it;
        }
    }

    for (auto it = replicas_.begin(); it != replicas_.end();) {
        if (doomed(*it)) {
            emit(NodeEvent::Kind::replica_dropped, *it);
            slaves_.erase(it->tau());
            it = replicas_.erase(it);
        } else {
            ++it;
        }
    }
}

void Node::handle_erase(const EraseFlood& e)
{
    if (auto* hop = query_cache_.find(e.qid)) {
        *hop = std::min(*hop, e.hop + 1);
        return;
    }
    query_cache_.insert(e.qid, e.hop + 1);
    out_.push(EraseFlood{e.qid, e.hop + 1, e.tau, e.before});
    remove_versions(e.tau, e.before, NodeEvent::Kind::erased);
}

void Node::handle_heartbeat(RobotId sender, const Heartbeat& h)
{
    if (h.slave == me_ && sender == h.master) {
        auto it = slaves_.find(h.tau);
        if (it != slaves_.end() && it->second.master == sender) {
            it->second.last_heartbeat = now_;
            out_.push(h);
        }
    } else if (h.master == me_ && sender == h.slave) {
        auto it = masters_.find(h.tau);
        if (it != masters_.end() && it->second.slave == sender)
            it->second.last_ack = now_;
    }
}

void Node::handle_assign(const ReplicaAssign& a)
{
    if (a.slave != me_ || holds_active(a.tuple.tau()))
        return;
    std::erase_if(replicas_, [&](const Tuple& r) { return r.tau() == a.tuple.tau(); });
    replicas_.push_back(a.tuple);
    slaves_[a.tuple.tau()] = SlaveRole{a.master, now_};
    emit(NodeEvent::Kind::replica_stored, a.tuple, a.master);
    enforce_capacity();
}

void Node::handle_kill(const ReplicaKill& k)
{
    if (k.slave != me_)
        return;
    auto role = slaves_.find(k.tau);
    if (role == slaves_.end() || role->second.master != k.master)
        return;
    slaves_.erase(role);
    for (auto it = replicas_.begin(); it != replicas_.end(); ++it) {
        if (it->tau() == k.tau) {
            emit(NodeEvent::Kind::replica_dropped, *it, k.master);
            replicas_.erase(it);
            break;
        }
    }
}

void Node::replication_tick()
{
    if (!params_.replication)
        return;

    for (auto& [tau, role] : masters_) {
        if (role.slave) {
            const NeighborInfo* n = neighbor(*role.slave);
            const bool drifted = !n || n->distance > params_.safe_radius;
            const bool silent = now_ - role.last_ack >= params_.heartbeat_timeout;
            if (drifted || silent) {
                out_.push(ReplicaKill{me_, *role.slave, tau});
                role.slave.reset();
            }
        }
        if (!role.slave) {
            std::vector<RobotId> nearby;
            for (const auto& n : neighbors_)
                if (n.distance <= params_.safe_radius)
                    nearby.push_back(n.id);
            if (nearby.empty())
                continue;
            auto it = std::find_if(storage_.begin(), storage_.end(), [&](const Tuple& t) { return t.tau() == tau; });
            if (it == storage_.end())
                continue;
            std::uniform_int_distribution<std::size_t> pick(0, nearby.size() - 1);
            role.slave = nearby[pick(rng_)];
            role.last_ack = now_;
            out_.push(ReplicaAssign{me_, *role.slave, *it});
            emit(NodeEvent::Kind::slave_assigned, *it, *role.slave);
        } else if (now_ % params_.heartbeat_period == 0) {
            out_.push(Heartbeat{me_, *role.slave, tau});
        }
    }

    std::vector<TupleId> expired;
    for (const auto& [tau, role] : slaves_)
        if (now_ - role.last_heartbeat >= params_.heartbeat_timeout)
            expired.push_back(tau);
    for (const auto& tau : expired) {
        slaves_.erase(tau);
        auto it = std::find_if(replicas_.begin(), replicas_.end(), [&](const Tuple& t) { return t.tau() == tau; });
        if (it == replicas_.end())
            continue;
        const Tuple copy = *it;
        replicas_.erase(it);
        emit(NodeEvent::Kind::replica_activated, copy);
        accept_tuple(copy);
    }
}

} // namespace swarmmesh
