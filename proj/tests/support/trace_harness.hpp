#pragma once

// Randomized protocol traces over a hand-driven network of nodes. The
// harness delivers each packet itself so that it can look at a node just
// before and just after every acceptance decision.

#include "swarmmesh/metrics.hpp"
#include "swarmmesh/node.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace swarmmesh::testing {

struct TraceReport {
    std::uint64_t seed = 0;
    std::size_t robots = 0;
    std::size_t steps = 0;
    std::size_t writes = 0;
    std::size_t acceptance_checks = 0; // stores inspected for (H)
    std::size_t dequeue_checks = 0;    // route_step choices inspected
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

class ProtocolTrace {
public:
    explicit ProtocolTrace(std::uint64_t seed) : rng_(seed)
    {
        report_.seed = seed;
        const auto n = pick(2, 12);
        storage_ = pick(1, 6);
        memory_ = storage_ + pick(1, 6);
        cap_ = pick(0, 3) == 0 ? 120 : 570;
        types_ = pick(1, 12);
        side_ = std::uniform_real_distribution<double>(1.0, 6.0)(rng_);
        move_prob_ = pick(0, 1) ? 0.0 : 0.3;
        write_prob_ = std::uniform_real_distribution<double>(0.1, 0.9)(rng_);
        report_.robots = n;
        report_.steps = pick(60, 200);

        NodeParams p;
        p.storage_S = storage_;
        p.memory_M = memory_;
        p.bandwidth_cap = cap_;
        p.hashing.n_event_types = types_;
        for (std::uint32_t i = 0; i < n; ++i) {
            nodes_.emplace_back(RobotId{i}, p, seed * 7919 + i);
            pos_.push_back(random_point());
        }
        beacon_.assign(n, 0);
    }

    TraceReport run()
    {
        for (Step t = 0; t < report_.steps; ++t)
            step(t);
        return report_;
    }

private:
    struct InFlight {
        std::size_t from;
        Message msg;
        std::vector<std::size_t> to;
    };

    std::uint32_t pick(std::uint32_t lo, std::uint32_t hi)
    {
        return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng_);
    }
    Vec2 random_point()
    {
        std::uniform_real_distribution<double> c(0.0, side_);
        return {c(rng_), c(rng_)};
    }
    std::vector<std::size_t> adjacent(std::size_t i) const
    {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < nodes_.size(); ++j)
            if (j != i && distance(pos_[i], pos_[j]) <= 2.0)
                out.push_back(j);
        return out;
    }
    void fail(Step t, std::size_t i, const std::string& what)
    {
        std::ostringstream os;
        os << "seed " << report_.seed << " step " << t << " robot " << i << ": " << what;
        report_.failures.push_back(os.str());
    }

    void absorb(std::size_t i)
    {
        for (const auto& ev : nodes_[i].take_events()) {
            switch (ev.kind) {
            case NodeEvent::Kind::written: ++written_; break;
            case NodeEvent::Kind::discarded:
            case NodeEvent::Kind::erased:
            case NodeEvent::Kind::superseded: ++removed_; break;
            default: break;
            }
        }
    }

    // A tuple that appears in storage across an operation that may only add
    // it through accept_tuple or the self-store branch of route_step.
    std::vector<Tuple> newly_stored(const std::vector<Tuple>& before, const Node& n) const
    {
        std::vector<Tuple> out;
        for (const auto& t : n.storage())
            if (std::find(before.begin(), before.end(), t) == before.end())
                out.push_back(t);
        return out;
    }

    void check_acceptance(Step t, std::size_t i, Delta before, const std::vector<Tuple>& stored_before)
    {
        for (const auto& s : newly_stored(stored_before, nodes_[i])) {
            ++report_.acceptance_checks;
            if (!can_hold(before, s.rho()))
                fail(t, i, "stored rho " + std::to_string(s.rho()) + " with delta " + std::to_string(before));
        }
    }

    void step(Step t)
    {
        if (move_prob_ > 0)
            for (auto& p : pos_)
                if (std::bernoulli_distribution(move_prob_)(rng_)) {
                    std::normal_distribution<double> d(0.0, 0.4);
                    p.x = std::clamp(p.x + d(rng_), 0.0, side_);
                    p.y = std::clamp(p.y + d(rng_), 0.0, side_);
                }

        std::vector<std::vector<Packet>> inbox(nodes_.size());
        for (auto& f : air_)
            for (std::size_t r : f.to)
                inbox[r].push_back(Packet{RobotId{static_cast<std::uint32_t>(f.from)}, f.msg});
        air_.clear();

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            std::vector<NeighborInfo> nb;
            for (std::size_t j : adjacent(i))
                nb.push_back(NeighborInfo{RobotId{static_cast<std::uint32_t>(j)}, beacon_[j],
                                          distance(pos_[i], pos_[j])});
            n.begin_step(t, std::move(nb));
            for (const auto& p : inbox[i]) {
                const Delta d = n.delta();
                const auto before = n.storage();
                n.receive(p);
                if (const auto* s = std::get_if<StoreRoute>(&p.message); s && s->dest == n.id())
                    check_acceptance(t, i, d, before);
            }

            const Delta d = n.delta();
            const auto before = n.storage();
            const auto queue = n.routing_queue().items();
            n.end_step();
            check_acceptance(t, i, d, before);
            check_dequeue(t, i, queue);
            absorb(i);
        }

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto sent = nodes_[i].transmit();
            if (nodes_[i].out_queue().bytes_sent_this_step() > cap_)
                fail(t, i, "sent over the cap");
            const auto to = adjacent(i);
            for (auto& m : sent) {
                if (const auto* b = std::get_if<Beacon>(&m))
                    beacon_[i] = b->delta;
                if (const auto* s = std::get_if<StoreRoute>(&m);
                    s && std::find(to.begin(), to.end(), s->dest.value) == to.end())
                    fail(t, i, "StoreRoute to a robot out of range");
                air_.push_back(InFlight{i, std::move(m), to});
            }
            absorb(i);
        }

        workload(t);
        audit(t);
    }

    std::vector<Tuple> pending_stores(const Node& n) const
    {
        std::vector<Tuple> out;
        for (const auto& m : n.out_queue().pending())
            if (const auto* s = std::get_if<StoreRoute>(&m))
                out.push_back(s->tuple);
        return out;
    }

    // Only route_step takes tuples out of the routing queue during end_step.
    void check_dequeue(Step t, std::size_t i, const std::vector<Tuple>& queue)
    {
        if (queue.empty())
            return;
        const Rho top = std::max_element(queue.begin(), queue.end(), [](const Tuple& a, const Tuple& b) {
                            return a.rho() < b.rho();
                        })->rho();
        const auto& now = nodes_[i].routing_queue().items();
        for (const auto& q : queue) {
            if (std::find(now.begin(), now.end(), q) != now.end())
                continue;
            ++report_.dequeue_checks;
            if (q.rho() != top)
                fail(t, i, "dequeued rho " + std::to_string(q.rho()) + " while " + std::to_string(top) + " waited");
        }
    }

    void workload(Step t)
    {
        if (std::bernoulli_distribution(write_prob_)(rng_)) {
            const std::size_t i = pick(0, static_cast<std::uint32_t>(nodes_.size() - 1));
            EventRecord e{random_point(), pick(0, types_ - 1), static_cast<std::int64_t>(pick(0, 2000)) - 1000, t};
            Node& n = nodes_[i];
            const Delta d = n.delta();
            const auto before = n.storage();
            const TupleId tau = n.put(e, t);
            check_acceptance(t, i, d, before);
            absorb(i);
            written_ids_.push_back(tau);
            ++report_.writes;
        }
        if (!written_ids_.empty() && std::bernoulli_distribution(0.03)(rng_)) {
            const std::size_t i = pick(0, static_cast<std::uint32_t>(nodes_.size() - 1));
            const auto& tau = written_ids_[pick(0, static_cast<std::uint32_t>(written_ids_.size() - 1))];
            nodes_[i].erase(tau, t);
            absorb(i);
        }
    }

    void audit(Step t)
    {
        std::vector<ActiveInstance> inst;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            if (n.occupancy() > memory_)
                fail(t, i, "occupancy " + std::to_string(n.occupancy()) + " over M");
            for (const auto& x : n.storage())
                inst.push_back(ActiveInstance{x.tau(), x.timestamp, n.id()});
            for (const auto& x : n.routing_queue().items())
                inst.push_back(ActiveInstance{x.tau(), x.timestamp, n.id()});
            for (const auto& x : pending_stores(n))
                inst.push_back(ActiveInstance{x.tau(), x.timestamp, n.id()});
        }
        for (const auto& f : air_)
            if (const auto* s = std::get_if<StoreRoute>(&f.msg))
                inst.push_back(ActiveInstance{s->tuple.tau(), s->tuple.timestamp, s->dest});
        if (written_ != inst.size() + removed_)
            fail(t, 0,
                 "conservation: written " + std::to_string(written_) + " != active " + std::to_string(inst.size()) +
                     " + removed " + std::to_string(removed_));
        if (!consistency_check(inst).empty())
            fail(t, 0, "duplicate active tuple");
    }

    std::mt19937_64 rng_;
    TraceReport report_;
    std::uint32_t storage_ = 0;
    std::uint32_t memory_ = 0;
    std::uint32_t cap_ = 570;
    std::uint32_t types_ = 12;
    double side_ = 1.0;
    double move_prob_ = 0.0;
    double write_prob_ = 0.5;

    std::vector<Node> nodes_;
    std::vector<Vec2> pos_;
    std::vector<Delta> beacon_;
    std::vector<InFlight> air_;
    std::vector<TupleId> written_ids_;
    std::size_t written_ = 0;
    std::size_t removed_ = 0;
};

inline TraceReport run_protocol_trace(std::uint64_t seed)
{
    return ProtocolTrace(seed).run();
}

} // namespace swarmmesh::testing
