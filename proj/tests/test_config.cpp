#include "oracles/frozen.hpp"

#include "swarmmesh/config.hpp"
#include "swarmmesh/core.hpp"
#include "swarmmesh/hashing.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace swarmmesh;

namespace {

bool has_problem(const std::vector<std::string>& problems, const std::string& needle)
{
    return std::any_of(problems.begin(), problems.end(),
                       [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

} // namespace

TEST_CASE("ids order lexicographically")
{
    CHECK(TupleId{RobotId{1}, 5} < TupleId{RobotId{2}, 0});
    CHECK(TupleId{RobotId{2}, 0} < TupleId{RobotId{2}, 1});
    CHECK(QueryId{RobotId{3}, 1} == QueryId{RobotId{3}, 1});
    CHECK(to_string(TupleId{RobotId{3}, 0}) == "3:0");
}

TEST_CASE("distance")
{
    CHECK(distance({0, 0}, {3, 4}) == doctest::Approx(5.0));
    CHECK(norm({-6, 8}) == doctest::Approx(10.0));
}

TEST_CASE("default configuration is valid")
{
    const SimConfig cfg;
    CHECK(validate_config(cfg).empty());
    CHECK(cfg.n_robots == 50);
    CHECK(cfg.memory_M == 20);
    CHECK(cfg.storage_S == 10);
    CHECK(cfg.routing_R == 10);
    CHECK(cfg.bandwidth_cap == 570);
    CHECK(cfg.comm_range_C == 2.0);
    CHECK(cfg.step_seconds == 0.1);
}

TEST_CASE("memory partition must add up")
{
    SimConfig cfg;
    cfg.storage_S = 15;
    const auto problems = validate_config(cfg);
    REQUIRE(problems.size() == 1);
    CHECK(problems.front() == "S+R ≠ M");
}

TEST_CASE("spatial hash range must stay below M·(N−1)")
{
    SimConfig cfg;
    cfg.n_robots = 10;
    cfg.hash_mode = HashMode::spatial;
    cfg.density = oracle::density_corner_8m;
    CHECK(max_hash(HashMode::spatial, cfg) == oracle::max_hash_corner_8m);
    const auto problems = validate_config(cfg);
    CHECK(has_problem(problems, "hash range exceeds max M·(N−1)"));
    CHECK(has_problem(problems, std::to_string(oracle::hash_bound_n10_m20)));

    cfg.hash_mode = HashMode::category;
    CHECK(validate_config(cfg).empty());
}

TEST_CASE("other invariants are reported")
{
    SimConfig cfg;
    cfg.density = 0;
    cfg.speed = -1;
    cfg.bandwidth_cap = 40;
    cfg.query_radii.clear();
    const auto problems = validate_config(cfg);
    CHECK(has_problem(problems, "density"));
    CHECK(has_problem(problems, "speed"));
    CHECK(has_problem(problems, "bandwidth_cap"));
    CHECK(has_problem(problems, "query_radii"));
}

TEST_CASE("arena side imposes density")
{
    CHECK(arena_side(50, 0.6) == doctest::Approx(oracle::arena_side_50_06).epsilon(1e-12));
    CHECK(arena_side(10, 1.0) == doctest::Approx(oracle::arena_side_10_1).epsilon(1e-12));
    CHECK(arena_side(100, 1.0) == doctest::Approx(10.0));
}

TEST_CASE("config text round-trips")
{
    SimConfig cfg;
    cfg.n_robots = 77;
    cfg.load_factor = 0.7;
    cfg.hash_mode = HashMode::spatial;
    cfg.event_field = EventField::disc;
    cfg.query_mix = QueryMix::mixed;
    cfg.query_radii = {0.25, 3.0};
    cfg.replication_enabled = true;
    cfg.rng_seed = 123456789012345ULL;
    cfg.density = 0.1 + 0.2; // not exactly representable as a short decimal
    CHECK(parse_config_string(to_config_text(cfg)) == cfg);
}

TEST_CASE("config parsing")
{
    const SimConfig cfg = parse_config_string("# comment\n\n n_robots = 12 \nspeed=0.05\nhash_mode=spatial\n");
    CHECK(cfg.n_robots == 12);
    CHECK(cfg.speed == 0.05);
    CHECK(cfg.hash_mode == HashMode::spatial);
    CHECK(cfg.memory_M == 20);

    CHECK_THROWS_AS(parse_config_string("no_such_key=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("n_robots=abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("n_robots\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("hash_mode=fancy\n"), ConfigError);

    SimConfig c;
    set_config_value(c, "load_factor", "0.9");
    CHECK(c.load_factor == 0.9);
    CHECK_THROWS_AS(set_config_value(c, "bogus", "1"), ConfigError);
}
