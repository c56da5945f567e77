#include "swarmmesh/query.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace swarmmesh {

bool matches(const QuerySpec& spec, const Tuple& t)
{
    if (const auto* k = std::get_if<KeyRange>(&spec)) {
        const std::int64_t rho = t.rho();
        return rho >= std::int64_t{k->k} - k->delta && rho <= std::int64_t{k->k} + k->delta;
    }
    const auto& s = std::get<SpatialRange>(spec);
    return distance(t.position, s.center) <= s.r;
}

std::optional<ReplyPayload> match_local(const QuerySpec& spec, std::span<const Tuple> active)
{
    const QueryOp op = op_of(spec);
    TuplesPayload hits;
    std::int64_t sum = 0;
    for (const auto& t : active) {
        if (!matches(spec, t))
            continue;
        hits.tuples.push_back(t);
        sum += t.value;
    }
    const auto n = static_cast<std::uint32_t>(hits.tuples.size());
    switch (op) {
    case QueryOp::get:
        return hits;
    case QueryOp::count:
        return CountPayload{n};
    case QueryOp::sum:
        return SumPayload{sum};
    case QueryOp::avg:
        return CountSumPayload{n, sum};
    case QueryOp::min:
    case QueryOp::max: {
        if (hits.tuples.empty())
            return std::nullopt;
        auto [lo, hi] = std::minmax_element(hits.tuples.begin(), hits.tuples.end(),
                                            [](const Tuple& a, const Tuple& b) { return a.value < b.value; });
        if (op == QueryOp::min)
            return MinPayload{lo->value};
        return MaxPayload{hi->value};
    }
    }
    return std::nullopt;
}

QueryOutcome combine_at_source(QueryOp op, std::span<const ReplyPayload> replies)
{
    QueryOutcome out;
    out.op = op;
    out.replies = replies.size();
    std::map<TupleId, Tuple> latest;

    auto wrong_kind = [&] { throw std::invalid_argument("reply payload does not match " + to_string(op)); };

    for (const auto& p : replies) {
        switch (op) {
        case QueryOp::get: {
            const auto* t = std::get_if<TuplesPayload>(&p);
            if (!t)
                wrong_kind();
            for (const auto& tu : t->tuples) {
                auto [it, inserted] = latest.emplace(tu.tau(), tu);
                if (!inserted && tu.timestamp > it->second.timestamp)
                    it->second = tu;
            }
            break;
        }
        case QueryOp::count: {
            const auto* c = std::get_if<CountPayload>(&p);
            if (!c)
                wrong_kind();
            out.count += c->n;
            break;
        }
        case QueryOp::sum: {
            const auto* s = std::get_if<SumPayload>(&p);
            if (!s)
                wrong_kind();
            out.sum += s->s;
            break;
        }
        case QueryOp::avg: {
            const auto* cs = std::get_if<CountSumPayload>(&p);
            if (!cs)
                wrong_kind();
            out.count += cs->n;
            out.sum += cs->s;
            break;
        }
        case QueryOp::min: {
            const auto* m = std::get_if<MinPayload>(&p);
            if (!m)
                wrong_kind();
            out.extreme = out.extreme ? std::min(*out.extreme, m->v) : m->v;
            break;
        }
        case QueryOp::max: {
            const auto* m = std::get_if<MaxPayload>(&p);
            if (!m)
                wrong_kind();
            out.extreme = out.extreme ? std::max(*out.extreme, m->v) : m->v;
            break;
        }
        }
    }

    if (op == QueryOp::get) {
        out.tuples.reserve(latest.size());
        for (auto& [_, t] : latest)
            out.tuples.push_back(t);
        out.count = out.tuples.size();
    }
    if (op == QueryOp::avg && out.count > 0)
        out.average = static_cast<double>(out.sum) / static_cast<double>(out.count);
    return out;
}

} // namespace swarmmesh
