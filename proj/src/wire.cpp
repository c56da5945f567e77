#include "swarmmesh/wire.hpp"

#include <bit>
#include <sstream>

namespace swarmmesh {

namespace {

enum class Tag : std::uint8_t {
    beacon = 1,
    query_flood = 2,
    reply = 3,
    store_route = 4,
    erase_flood = 5,
    heartbeat = 6,
    replica_assign = 7,
    replica_kill = 8,
};

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::size_t kTag = 1;
constexpr std::size_t kId = 4;
constexpr std::size_t kPairId = 8;
constexpr std::size_t kU32 = 4;
constexpr std::size_t kValue = 8;
constexpr std::size_t kCoord = 8;

std::size_t spec_size(const QuerySpec& spec)
{
    return std::holds_alternative<KeyRange>(spec) ? kTag + 1 + kU32 + kU32 : kTag + 1 + 3 * kCoord;
}

std::size_t payload_size(const ReplyPayload& p)
{
    return kTag + std::visit(overloaded{
                                 [](const TuplesPayload& t) { return kU32 + t.tuples.size() * tuple_wire_size; },
                                 [](const CountPayload&) { return kU32; },
                                 [](const SumPayload&) { return kValue; },
                                 [](const CountSumPayload&) { return kU32 + kValue; },
                                 [](const MinPayload&) { return kValue; },
                                 [](const MaxPayload&) { return kValue; },
                             },
                             p);
}

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void robot(RobotId id) { u32(id.value); }
    void tau(const TupleId& t)
    {
        robot(t.writer);
        u32(t.seq);
    }
    void qid(const QueryId& q)
    {
        robot(q.origin);
        u32(q.seq);
    }
    void tuple(const Tuple& t)
    {
        tau(t.key.tau);
        u32(t.key.rho);
        i64(t.value);
        f64(t.position.x);
        f64(t.position.y);
        u32(t.timestamp);
    }
    void spec(const QuerySpec& s)
    {
        std::visit(overloaded{
                       [&](const KeyRange& k) {
                           u8(1);
                           u8(static_cast<std::uint8_t>(k.op));
                           u32(k.k);
                           u32(k.delta);
                       },
                       [&](const SpatialRange& sp) {
                           u8(2);
                           u8(static_cast<std::uint8_t>(sp.op));
                           f64(sp.center.x);
                           f64(sp.center.y);
                           f64(sp.r);
                       },
                   },
                   s);
    }
    void payload(const ReplyPayload& p)
    {
        std::visit(overloaded{
                       [&](const TuplesPayload& t) {
                           u8(1);
                           u32(static_cast<std::uint32_t>(t.tuples.size()));
                           for (const auto& tu : t.tuples)
                               tuple(tu);
                       },
                       [&](const CountPayload& c) {
                           u8(2);
                           u32(c.n);
                       },
                       [&](const SumPayload& s) {
                           u8(3);
                           i64(s.s);
                       },
                       [&](const CountSumPayload& cs) {
                           u8(4);
                           u32(cs.n);
                           i64(cs.s);
                       },
                       [&](const MinPayload& m) {
                           u8(5);
                           i64(m.v);
                       },
                       [&](const MaxPayload& m) {
                           u8(6);
                           i64(m.v);
                       },
                   },
                   p);
    }

private:
    std::vector<std::uint8_t>& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t>& in) : in_(in) {}

    void need(std::size_t n) const
    {
        if (in_.size() < n)
            throw DecodeError("truncated message");
    }
    std::uint8_t u8()
    {
        need(1);
        const std::uint8_t v = in_[0];
        in_ = in_.subspan(1);
        return v;
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t{in_[i]} << (8 * i);
        in_ = in_.subspan(4);
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t{in_[i]} << (8 * i);
        in_ = in_.subspan(8);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    RobotId robot() { return RobotId{u32()}; }
    TupleId tau()
    {
        const RobotId w = robot();
        return TupleId{w, u32()};
    }
    QueryId qid()
    {
        const RobotId o = robot();
        return QueryId{o, u32()};
    }
    Tuple tuple()
    {
        Tuple t;
        t.key.tau = tau();
        t.key.rho = u32();
        t.value = i64();
        t.position.x = f64();
        t.position.y = f64();
        t.timestamp = u32();
        return t;
    }
    QueryOp op()
    {
        const std::uint8_t v = u8();
        if (v > static_cast<std::uint8_t>(QueryOp::max))
            throw DecodeError("bad query op " + std::to_string(v));
        return static_cast<QueryOp>(v);
    }
    QuerySpec spec()
    {
        const std::uint8_t tag = u8();
        if (tag == 1) {
            KeyRange k;
            k.op = op();
            k.k = u32();
            k.delta = u32();
            return k;
        }
        if (tag == 2) {
            SpatialRange s;
            s.op = op();
            s.center.x = f64();
            s.center.y = f64();
            s.r = f64();
            return s;
        }
        throw DecodeError("bad query spec tag " + std::to_string(tag));
    }
    ReplyPayload payload()
    {
        switch (u8()) {
        case 1: {
            const std::uint32_t n = u32();
            need(std::size_t{n} * tuple_wire_size);
            TuplesPayload t;
            t.tuples.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i)
                t.tuples.push_back(tuple());
            return t;
        }
        case 2:
            return CountPayload{u32()};
        case 3:
            return SumPayload{i64()};
        case 4: {
            const std::uint32_t n = u32();
            return CountSumPayload{n, i64()};
        }
        case 5:
            return MinPayload{i64()};
        case 6:
            return MaxPayload{i64()};
        default:
            throw DecodeError("bad reply payload tag");
        }
    }

private:
    std::span<const std::uint8_t>& in_;
};

} // namespace

QueryOp op_of(const QuerySpec& spec)
{
    return std::visit([](const auto& s) { return s.op; }, spec);
}

std::size_t message_size(const Message& m)
{
    return kTag + std::visit(overloaded{
                                 [](const Beacon&) { return kId + kU32; },
                                 [](const QueryFlood& q) { return kPairId + kU32 + spec_size(q.spec); },
                                 [](const Reply& r) {
                                     return kPairId + kPairId + kU32 + payload_size(r.payload);
                                 },
                                 [](const StoreRoute&) { return kId + tuple_wire_size; },
                                 [](const EraseFlood&) { return kPairId + kU32 + kPairId + kU32; },
                                 [](const Heartbeat&) { return kId + kId + kPairId; },
                                 [](const ReplicaAssign&) { return kId + kId + tuple_wire_size; },
                                 [](const ReplicaKill&) { return kId + kId + kPairId; },
                             },
                             m);
}

std::size_t max_fixed_message_size()
{
    return message_size(ReplicaAssign{});
}

std::size_t tuples_per_reply(std::uint32_t cap)
{
    const std::size_t empty = message_size(Reply{QueryId{}, ReplyId{}, 0, TuplesPayload{}});
    if (cap <= empty)
        return 0;
    return (cap - empty) / tuple_wire_size;
}

void encode_into(const Message& m, std::vector<std::uint8_t>& out)
{
    Writer w(out);
    std::visit(overloaded{
                   [&](const Beacon& b) {
                       w.u8(static_cast<std::uint8_t>(Tag::beacon));
                       w.robot(b.sender);
                       w.u32(b.delta);
                   },
                   [&](const QueryFlood& q) {
                       w.u8(static_cast<std::uint8_t>(Tag::query_flood));
                       w.qid(q.qid);
                       w.u32(q.hop);
                       w.spec(q.spec);
                   },
                   [&](const Reply& r) {
                       w.u8(static_cast<std::uint8_t>(Tag::reply));
                       w.qid(r.qid);
                       w.robot(r.reply_id.replier);
                       w.u32(r.reply_id.seq);
                       w.u32(r.hop_stamp);
                       w.payload(r.payload);
                   },
                   [&](const StoreRoute& s) {
                       w.u8(static_cast<std::uint8_t>(Tag::store_route));
                       w.robot(s.dest);
                       w.tuple(s.tuple);
                   },
                   [&](const EraseFlood& e) {
                       w.u8(static_cast<std::uint8_t>(Tag::erase_flood));
                       w.qid(e.qid);
                       w.u32(e.hop);
                       w.tau(e.tau);
                       w.u32(e.before);
                   },
                   [&](const Heartbeat& h) {
                       w.u8(static_cast<std::uint8_t>(Tag::heartbeat));
                       w.robot(h.master);
                       w.robot(h.slave);
                       w.tau(h.tau);
                   },
                   [&](const ReplicaAssign& a) {
                       w.u8(static_cast<std::uint8_t>(Tag::replica_assign));
                       w.robot(a.master);
                       w.robot(a.slave);
                       w.tuple(a.tuple);
                   },
                   [&](const ReplicaKill& k) {
                       w.u8(static_cast<std::uint8_t>(Tag::replica_kill));
                       w.robot(k.master);
                       w.robot(k.slave);
                       w.tau(k.tau);
                   },
               },
               m);
}

std::vector<std::uint8_t> encode(const Message& m)
{
    std::vector<std::uint8_t> out;
    out.reserve(message_size(m));
    encode_into(m, out);
    return out;
}

Message decode_one(std::span<const std::uint8_t>& in)
{
    Reader r(in);
    switch (static_cast<Tag>(r.u8())) {
    case Tag::beacon: {
        Beacon b;
        b.sender = r.robot();
        b.delta = r.u32();
        return b;
    }
    case Tag::query_flood: {
        QueryFlood q;
        q.qid = r.qid();
        q.hop = r.u32();
        q.spec = r.spec();
        return q;
    }
    case Tag::reply: {
        Reply rep;
        rep.qid = r.qid();
        rep.reply_id.replier = r.robot();
        rep.reply_id.seq = r.u32();
        rep.hop_stamp = r.u32();
        rep.payload = r.payload();
        return rep;
    }
    case Tag::store_route: {
        StoreRoute s;
        s.dest = r.robot();
        s.tuple = r.tuple();
        return s;
    }
    case Tag::erase_flood: {
        EraseFlood e;
        e.qid = r.qid();
        e.hop = r.u32();
        e.tau = r.tau();
        e.before = r.u32();
        return e;
    }
    case Tag::heartbeat: {
        Heartbeat h;
        h.master = r.robot();
        h.slave = r.robot();
        h.tau = r.tau();
        return h;
    }
    case Tag::replica_assign: {
        ReplicaAssign a;
        a.master = r.robot();
        a.slave = r.robot();
        a.tuple = r.tuple();
        return a;
    }
    case Tag::replica_kill: {
        ReplicaKill k;
        k.master = r.robot();
        k.slave = r.robot();
        k.tau = r.tau();
        return k;
    }
    }
    throw DecodeError("unknown message tag");
}

Message decode(std::span<const std::uint8_t> bytes)
{
    Message m = decode_one(bytes);
    if (!bytes.empty())
        throw DecodeError("trailing bytes after message");
    return m;
}

std::string to_string(QueryOp op)
{
    switch (op) {
    case QueryOp::get:
        return "get";
    case QueryOp::count:
        return "count";
    case QueryOp::sum:
        return "sum";
    case QueryOp::avg:
        return "avg";
    case QueryOp::min:
        return "min";
    case QueryOp::max:
        return "max";
    }
    return "?";
}

std::string to_string(const QuerySpec& spec)
{
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const KeyRange& k) { os << to_string(k.op) << "(k=" << k.k << ",d=" << k.delta << ")"; },
                   [&](const SpatialRange& s) {
                       os << to_string(s.op) << "(x=" << s.center.x << ",y=" << s.center.y << ",r=" << s.r << ")";
                   },
               },
               spec);
    return os.str();
}

std::string to_string(const Message& m)
{
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const Beacon& b) { os << "Beacon sender=" << b.sender.value << " delta=" << b.delta; },
                   [&](const QueryFlood& q) {
                       os << "QueryFlood qid=" << to_string(q.qid) << " hop=" << q.hop << " " << to_string(q.spec);
                   },
                   [&](const Reply& r) {
                       os << "Reply qid=" << to_string(r.qid) << " id=" << r.reply_id.replier.value << "."
                          << r.reply_id.seq << " stamp=" << r.hop_stamp << " payload=";
                       std::visit(overloaded{
                                      [&](const TuplesPayload& t) { os << "tuples[" << t.tuples.size() << "]"; },
                                      [&](const CountPayload& c) { os << "count " << c.n; },
                                      [&](const SumPayload& s) { os << "sum " << s.s; },
                                      [&](const CountSumPayload& cs) { os << "countsum " << cs.n << "," << cs.s; },
                                      [&](const MinPayload& p) { os << "min " << p.v; },
                                      [&](const MaxPayload& p) { os << "max " << p.v; },
                                  },
                                  r.payload);
                   },
                   [&](const StoreRoute& s) {
                       os << "StoreRoute dest=" << s.dest.value << " tau=" << to_string(s.tuple.tau())
                          << " rho=" << s.tuple.rho();
                   },
                   [&](const EraseFlood& e) {
                       os << "EraseFlood qid=" << to_string(e.qid) << " hop=" << e.hop << " tau=" << to_string(e.tau)
                          << " before=" << e.before;
                   },
                   [&](const Heartbeat& h) {
                       os << "Heartbeat master=" << h.master.value << " slave=" << h.slave.value
                          << " tau=" << to_string(h.tau);
                   },
                   [&](const ReplicaAssign& a) {
                       os << "ReplicaAssign master=" << a.master.value << " slave=" << a.slave.value
                          << " tau=" << to_string(a.tuple.tau());
                   },
                   [&](const ReplicaKill& k) {
                       os << "ReplicaKill master=" << k.master.value << " slave=" << k.slave.value
                          << " tau=" << to_string(k.tau);
                   },
               },
               m);
    return os.str();
}

bool OutQueue::has_store_route() const
{
    for (const auto& m : pending_)
        if (holds<StoreRoute>(m))
            return true;
    return false;
}

std::size_t OutQueue::pending_bytes() const
{
    std::size_t total = 0;
    for (const auto& m : pending_)
        total += message_size(m);
    return total;
}

std::vector<Message> OutQueue::flush(std::uint32_t cap)
{
    std::vector<Message> sent;
    std::deque<Message> kept;
    bytes_sent_ = 0;
    bool store_sent = false;
    while (!pending_.empty()) {
        Message& head = pending_.front();
        if (holds<StoreRoute>(head) && store_sent) {
            kept.push_back(std::move(head));
            pending_.pop_front();
            continue;
        }
        const std::size_t size = message_size(head);
        if (bytes_sent_ + size > cap)
            break;
        bytes_sent_ += size;
        store_sent = store_sent || holds<StoreRoute>(head);
        sent.push_back(std::move(head));
        pending_.pop_front();
    }
    // Held-back StoreRoutes were ahead of whatever did not fit.
    for (auto it = kept.rbegin(); it != kept.rend(); ++it)
        pending_.push_front(std::move(*it));
    return sent;
}

} // namespace swarmmesh
