#include "oracles/frozen.hpp"

#include "swarmmesh/wire.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace swarmmesh;

namespace {

Tuple sample_tuple(std::uint32_t seq = 3)
{
    return Tuple{Key{TupleId{RobotId{9}, seq}, 71}, -512, Vec2{1.25, -3.5}, 1234};
}

class RandomMessages {
public:
    explicit RandomMessages(std::uint64_t seed) : rng_(seed) {}

    Message next()
    {
        switch (pick(0, 7)) {
        case 0: return Beacon{robot(), u32()};
        case 1: return QueryFlood{qid(), u32(), spec()};
        case 2: return Reply{qid(), ReplyId{robot(), u32()}, u32(), payload()};
        case 3: return StoreRoute{robot(), tuple()};
        case 4: return EraseFlood{qid(), u32(), tau(), u32()};
        case 5: return Heartbeat{robot(), robot(), tau()};
        case 6: return ReplicaAssign{robot(), robot(), tuple()};
        default: return ReplicaKill{robot(), robot(), tau()};
        }
    }

private:
    std::uint32_t pick(std::uint32_t lo, std::uint32_t hi)
    {
        return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng_);
    }
    std::uint32_t u32() { return pick(0, 0xffffffffu); }
    std::int64_t i64() { return std::uniform_int_distribution<std::int64_t>()(rng_); }
    double real() { return std::uniform_real_distribution<double>(-1e6, 1e6)(rng_); }
    RobotId robot() { return RobotId{u32()}; }
    TupleId tau() { return TupleId{robot(), u32()}; }
    QueryId qid() { return QueryId{robot(), u32()}; }
    QueryOp op() { return static_cast<QueryOp>(pick(0, 5)); }
    Tuple tuple() { return Tuple{Key{tau(), u32()}, i64(), Vec2{real(), real()}, u32()}; }
    QuerySpec spec()
    {
        if (pick(0, 1))
            return KeyRange{u32(), u32(), op()};
        return SpatialRange{Vec2{real(), real()}, std::abs(real()) + 0.1, op()};
    }
    ReplyPayload payload()
    {
        switch (pick(0, 5)) {
        case 0: {
            TuplesPayload p;
            for (std::uint32_t n = pick(0, 13); n > 0; --n)
                p.tuples.push_back(tuple());
            return p;
        }
        case 1: return CountPayload{u32()};
        case 2: return SumPayload{i64()};
        case 3: return CountSumPayload{u32(), i64()};
        case 4: return MinPayload{i64()};
        default: return MaxPayload{i64()};
        }
    }

    std::mt19937_64 rng_;
};

} // namespace

TEST_CASE("message sizes follow the field widths")
{
    CHECK(tuple_wire_size == oracle::size_tuple);
    CHECK(message_size(Beacon{}) == oracle::size_beacon);
    CHECK(message_size(StoreRoute{RobotId{1}, sample_tuple()}) == oracle::size_store_route);
    CHECK(message_size(Heartbeat{}) == oracle::size_heartbeat);
    CHECK(message_size(ReplicaKill{}) == oracle::size_replica_kill);
    CHECK(message_size(ReplicaAssign{}) == oracle::size_replica_assign);
    CHECK(message_size(EraseFlood{}) == oracle::size_erase_flood);
    CHECK(message_size(QueryFlood{QueryId{}, 0, KeyRange{}}) == oracle::size_query_flood_key);
    CHECK(message_size(QueryFlood{QueryId{}, 0, SpatialRange{}}) == oracle::size_query_flood_spatial);
    CHECK(message_size(Reply{QueryId{}, ReplyId{}, 0, CountPayload{}}) == oracle::size_reply_count);
    CHECK(message_size(Reply{QueryId{}, ReplyId{}, 0, TuplesPayload{}}) == oracle::size_reply_tuples_empty);
    CHECK(max_fixed_message_size() == oracle::size_replica_assign);
}

TEST_CASE("reply chunking fits the cap")
{
    const std::size_t n = tuples_per_reply(570);
    CHECK(n == (570 - oracle::size_reply_tuples_empty) / oracle::size_tuple);
    Reply r{QueryId{}, ReplyId{}, 0, TuplesPayload{std::vector<Tuple>(n, sample_tuple())}};
    CHECK(message_size(r) <= 570);
    std::get<TuplesPayload>(r.payload).tuples.push_back(sample_tuple());
    CHECK(message_size(r) > 570);
    CHECK(tuples_per_reply(20) == 0);
}

TEST_CASE("encoded length equals message_size")
{
    RandomMessages gen(11);
    for (int i = 0; i < 500; ++i) {
        const Message m = gen.next();
        CHECK(encode(m).size() == message_size(m));
    }
}

TEST_CASE("encode/decode round trip")
{
    RandomMessages gen(2024);
    for (int i = 0; i < 5000; ++i) {
        const Message m = gen.next();
        const auto bytes = encode(m);
        const Message back = decode(bytes);
        REQUIRE(back == m);
        CHECK(encode(back) == bytes);
    }
}

TEST_CASE("decode_one walks a concatenated stream")
{
    RandomMessages gen(5);
    std::vector<Message> msgs;
    std::vector<std::uint8_t> buf;
    for (int i = 0; i < 50; ++i) {
        msgs.push_back(gen.next());
        encode_into(msgs.back(), buf);
    }
    std::span<const std::uint8_t> in(buf);
    for (const auto& m : msgs)
        CHECK(decode_one(in) == m);
    CHECK(in.empty());
}

TEST_CASE("malformed input is rejected")
{
    const auto bytes = encode(StoreRoute{RobotId{2}, sample_tuple()});
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
    CHECK_THROWS_AS(decode(cut), DecodeError);

    std::vector<std::uint8_t> bad_tag = bytes;
    bad_tag[0] = 0xee;
    CHECK_THROWS_AS(decode(bad_tag), DecodeError);

    std::vector<std::uint8_t> extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(decode(extra), DecodeError);

    const std::vector<std::uint8_t> empty;
    CHECK_THROWS_AS(decode(empty), DecodeError);
}

TEST_CASE("text rendering names the variant")
{
    CHECK(to_string(Message{Beacon{RobotId{4}, 30}}).find("Beacon") != std::string::npos);
    CHECK(to_string(Message{StoreRoute{RobotId{4}, sample_tuple()}}).find("StoreRoute") != std::string::npos);
    CHECK(to_string(QueryOp::avg) == "avg");
}

TEST_CASE("flush sends a single beacon")
{
    OutQueue q;
    q.push(Beacon{RobotId{1}, 5});
    const auto sent = q.flush(570);
    CHECK(sent.size() == 1);
    CHECK(q.bytes_sent_this_step() == oracle::size_beacon);
    CHECK(q.empty());
}

TEST_CASE("one StoreRoute per flush, the rest keeps its place")
{
    OutQueue q;
    q.push(StoreRoute{RobotId{1}, sample_tuple(1)});
    q.push(StoreRoute{RobotId{2}, sample_tuple(2)});
    q.push(Beacon{RobotId{0}, 7});
    auto sent = q.flush(570);
    REQUIRE(sent.size() == 2);
    CHECK(std::get<StoreRoute>(sent[0]).dest == RobotId{1});
    CHECK(holds<Beacon>(sent[1]));
    REQUIRE(q.size() == 1);
    CHECK(std::get<StoreRoute>(q.pending().front()).dest == RobotId{2});
    CHECK(q.has_store_route());

    sent = q.flush(570);
    CHECK(sent.size() == 1);
    CHECK(q.empty());
    CHECK_FALSE(q.has_store_route());
}

TEST_CASE("600 B of erase floods under a 570 B cap")
{
    OutQueue q;
    for (std::size_t i = 0; i < oracle::erase_flood_count_600; ++i)
        q.push(EraseFlood{QueryId{RobotId{0}, static_cast<std::uint32_t>(i)}, 0, TupleId{}, 0});
    CHECK(q.pending_bytes() == 600);
    const auto sent = q.flush(570);
    CHECK(sent.size() == oracle::erase_flood_sent_570);
    CHECK(q.bytes_sent_this_step() == oracle::erase_flood_bytes_570);
    CHECK(q.pending_bytes() == 600 - oracle::erase_flood_bytes_570);
    for (std::size_t i = 0; i < sent.size(); ++i)
        CHECK(std::get<EraseFlood>(sent[i]).qid.seq == i);
    CHECK(std::get<EraseFlood>(q.pending().front()).qid.seq == sent.size());
}

TEST_CASE("600 B of mixed floods under a 570 B cap")
{
    // Five spatial query floods, ten key floods and seven erase floods,
    // interleaved spatial, key, key, erase.
    int spatial = 5, key = 10, erase = 7;
    OutQueue q;
    std::uint32_t seq = 0;
    auto next = [&] { return QueryId{RobotId{0}, seq++}; };
    while (spatial + key + erase > 0) {
        if (spatial > 0) {
            q.push(QueryFlood{next(), 0, SpatialRange{}});
            --spatial;
        }
        for (int k = 0; k < 2 && key > 0; ++k, --key)
            q.push(QueryFlood{next(), 0, KeyRange{}});
        if (erase > 0) {
            q.push(EraseFlood{next(), 0, TupleId{}, 0});
            --erase;
        }
    }
    REQUIRE(q.pending_bytes() == 600);
    const auto sent = q.flush(570);
    CHECK(sent.size() == oracle::mixed_flood_sent_570);
    CHECK(q.bytes_sent_this_step() == oracle::mixed_flood_bytes_570);
    CHECK(q.pending_bytes() == 600 - oracle::mixed_flood_bytes_570);
}

TEST_CASE("flush preserves FIFO order and never exceeds the cap")
{
    RandomMessages gen(77);
    std::mt19937_64 rng(78);
    for (int trial = 0; trial < 200; ++trial) {
        OutQueue q;
        std::vector<Message> all;
        const int n = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int i = 0; i < n; ++i) {
            Message m = gen.next();
            if (message_size(m) > 570)
                continue;
            all.push_back(m);
            q.push(m);
        }
        std::vector<Message> out;
        while (!q.empty()) {
            const auto sent = q.flush(570);
            REQUIRE_FALSE(sent.empty());
            CHECK(q.bytes_sent_this_step() <= 570);
            std::size_t bytes = 0;
            int stores = 0;
            for (const auto& m : sent) {
                bytes += message_size(m);
                stores += holds<StoreRoute>(m) ? 1 : 0;
            }
            CHECK(bytes == q.bytes_sent_this_step());
            CHECK(stores <= 1);
            out.insert(out.end(), sent.begin(), sent.end());
        }
        // Non-StoreRoute traffic keeps its relative order; so do StoreRoutes.
        auto filter = [](const std::vector<Message>& v, bool store) {
            std::vector<Message> r;
            for (const auto& m : v)
                if (holds<StoreRoute>(m) == store)
                    r.push_back(m);
            return r;
        };
        CHECK(filter(out, true) == filter(all, true));
        CHECK(filter(out, false) == filter(all, false));
    }
}
