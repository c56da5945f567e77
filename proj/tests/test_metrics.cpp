#include "oracles/frozen.hpp"

#include "swarmmesh/metrics.hpp"
#include "swarmmesh/sim.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace swarmmesh;

namespace {

std::string first_line(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

TupleId tau(std::uint32_t seq)
{
    return TupleId{RobotId{1}, seq};
}

} // namespace

TEST_CASE("retention counts new tuples only")
{
    MetricsLog log;
    CHECK_FALSE(retention(log));
    for (std::uint32_t i = 0; i < 10; ++i)
        log.writes.push_back(WriteRecord{tau(i), 1, 0, true});
    log.writes.push_back(WriteRecord{tau(0), 1, 5, false});
    log.discards.push_back(DiscardRecord{tau(3), 1, 9});
    log.erases.push_back(EraseRecord{tau(4), 9, true});
    log.erases.push_back(EraseRecord{tau(0), 5, false}); // superseded version
    CHECK(*retention(log) == doctest::Approx(0.8));
}

TEST_CASE("availability per completed get")
{
    MetricsLog log;
    QueryRecord q;
    q.op = QueryOp::get;
    q.completed = true;
    q.replies_expected = 4;
    q.replies_received = 3;
    log.query_events.push_back(q);
    q.replies_expected = 0;
    q.replies_received = 0;
    log.query_events.push_back(q);
    q.op = QueryOp::count;
    log.query_events.push_back(q);
    q.op = QueryOp::get;
    q.completed = false;
    log.query_events.push_back(q);
    CHECK(availability(log) == std::vector<double>{0.75, 1.0});
}

TEST_CASE("consistency check reports duplicated ids once")
{
    const std::vector<ActiveInstance> inst{
        {tau(1), 0, RobotId{0}}, {tau(2), 0, RobotId{0}}, {tau(1), 0, RobotId{3}}, {tau(1), 4, RobotId{5}}};
    CHECK(consistency_check(inst) == std::vector<TupleId>{tau(1)});
    CHECK(consistency_check(std::vector<ActiveInstance>{}).empty());
}

TEST_CASE("histogram bins are contiguous")
{
    const std::vector<double> v{1, 11, 11, 31, 12};
    const auto h = histogram(v, 10);
    REQUIRE(h.size() == 4);
    CHECK(h[0].low == 0);
    CHECK(h[0].count == 1);
    CHECK(h[1].count == 3);
    CHECK(h[2].count == 0);
    CHECK(h[3].low == 30);
    CHECK(h[3].high == 40);
    CHECK(histogram(std::vector<double>{}, 10).empty());
    CHECK_THROWS(histogram(v, 0));
}

TEST_CASE("median")
{
    CHECK(median({3, 1, 2}) == 2);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(std::isnan(median({})));
}

TEST_CASE("spearman with average ranks")
{
    const std::vector<double> a{1, 2, 3, 4, 5}, b{5, 6, 7, 8, 7};
    CHECK(spearman(a, b) == doctest::Approx(oracle::spearman_ties).epsilon(1e-12));
    const std::vector<double> c{10, 20, 30, 40}, d{1, 3, 2, 4};
    CHECK(spearman(c, d) == doctest::Approx(oracle::spearman_swap).epsilon(1e-12));
    const std::vector<double> e{4, 3, 2, 1};
    CHECK(spearman(c, e) == doctest::Approx(-1.0));
    const std::vector<double> flat{2, 2, 2, 2};
    CHECK(std::isnan(spearman(c, flat)));
}

TEST_CASE("latency report bins by rho and by radius")
{
    MetricsLog log;
    for (std::uint32_t i = 0; i < 4; ++i)
        log.writes.push_back(WriteRecord{tau(i), 11, 0, true});
    log.store_settled.push_back(SettleRecord{tau(0), 1, 2, 0});
    log.store_settled.push_back(SettleRecord{tau(1), 11, 4, 1});
    log.store_settled.push_back(SettleRecord{tau(2), 19, 8, 3});
    QueryRecord q;
    q.completed = true;
    q.radius = 1.0;
    q.emit_step = 10;
    q.last_reply_step = 16;
    log.query_events.push_back(q);
    q.last_reply_step.reset();
    log.query_events.push_back(q);
    q.radius = 0.5;
    q.last_reply_step = 12;
    log.query_events.push_back(q);

    const auto r = latency_report(log, 10);
    REQUIRE(r.store.size() == 2);
    CHECK(r.store[0].low == 0);
    CHECK(r.store[0].median_steps == 2);
    CHECK(r.store[1].settled == 2);
    CHECK(r.store[1].median_steps == 6);
    CHECK(r.store[1].median_hops == 2);
    CHECK(r.unsettled == 1);
    REQUIRE(r.query.size() == 2);
    CHECK(r.query[0].radius == 0.5);
    CHECK(r.query[1].issued == 2);
    CHECK(r.query[1].completed == 1);
    CHECK(r.query[1].median_steps == 6);
}

TEST_CASE("stored fraction and bandwidth summary")
{
    MetricsLog log;
    log.stored_routed = {{0, 3, 1}, {1, 0, 0}, {2, 1, 1}};
    const auto s = stored_vs_routed(log);
    REQUIRE(s.size() == 2);
    CHECK(s[0].second == 0.75);
    CHECK(s[1].first == 2);

    log.bandwidth = {{0, 9, 45}, {9, 9, 570}};
    const auto b = bandwidth_summary(log);
    CHECK(b.median == 9);
    CHECK(b.max == 570);
    CHECK(b.mean == doctest::Approx(642.0 / 6));
}

TEST_CASE("metric CSVs carry their headers")
{
    SimConfig cfg;
    cfg.n_robots = 10;
    cfg.load_factor = 0.4;
    World w(cfg);
    w.run();
    const auto dir = std::filesystem::temp_directory_path() / "swarmmesh_metrics_csv";
    std::filesystem::remove_all(dir);
    write_metric_csvs(w.log(), dir, CsvOptions{});
    CHECK(first_line(dir / "retention.csv") ==
          "writes,discards,user_erases,lost,restored,events_generated,events_pending,unsettled,retention");
    CHECK(first_line(dir / "availability.csv") == "qid,emit_step,expected,received,availability");
    CHECK(first_line(dir / "delta_hist.csv") == "bin_low,bin_high,count");
    CHECK(first_line(dir / "rho_hist.csv") == "bin_low,bin_high,count");
    CHECK(first_line(dir / "store_latency.csv") == "rho_low,rho_high,settled,median_steps,median_hops");
    CHECK(first_line(dir / "query_latency.csv") == "radius,issued,completed,median_steps");
    CHECK(first_line(dir / "bandwidth.csv") == "step,median_bytes,max_bytes,total_bytes");
    CHECK(first_line(dir / "stored_routed.csv") == "step,stored,routed,ratio");
    std::filesystem::remove_all(dir);
}

TEST_CASE("category hashing puts rho mass on the ranking values")
{
    SimConfig cfg;
    cfg.load_factor = 1.0;
    World w(cfg, WorldOptions{true, false, false, false});
    w.run();
    REQUIRE(w.log().rho_samples.size() >= 400);
    std::set<Rho> seen(w.log().rho_samples.begin(), w.log().rho_samples.end());
    std::set<Rho> expected;
    for (Rho r = 1; r <= 111; r += 10)
        expected.insert(r);
    CHECK(seen == expected);
}

TEST_CASE("static connected network answers every get in full once quiet")
{
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; checked < 3 && seed < 40; ++seed) {
        SimConfig cfg;
        cfg.n_robots = 20;
        cfg.n_event_types = 4;
        cfg.load_factor = 0.5;
        cfg.quiescence_steps = 5000;
        cfg.rng_seed = seed;
        World w(cfg, WorldOptions{true, false, true, false});
        if (!is_connected(w.graph()))
            continue;
        while (w.phase() == RunPhase::generating)
            w.step();
        for (int i = 0; i < 200; ++i)
            w.step();
        for (int k = 0; k < 8; ++k)
            w.issue_query(static_cast<std::size_t>(k),
                          SpatialRange{{0.0, 0.0}, 1.0 + static_cast<double>(k) * 0.5, QueryOp::get});
        for (Step s = 0; s <= cfg.collection_window; ++s)
            w.step();
        const auto avail = availability(w.log());
        REQUIRE(avail.size() == 8);
        for (double a : avail)
            CHECK(a == 1.0);
        ++checked;
    }
    CHECK(checked == 3);
}
