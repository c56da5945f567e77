#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmmesh {

enum class HashMode { category, spatial };

/// Where events are placed: uniformly over the arena, or uniformly over
/// the part of the arena within `disc_radius` of the origin.
enum class EventField { uniform, disc };

/// Query workload: spatial get() only, or every operation over both range kinds.
enum class QueryMix { spatial_get, mixed };

struct SimConfig {
    // Evaluation parameters (defaults follow the reference parameter table).
    std::uint32_t n_robots = 50;
    double comm_range_C = 2.0;            // m
    std::uint32_t memory_M = 20;          // tuple slots
    std::uint32_t storage_S = 10;         // tuple slots
    std::uint32_t routing_R = 10;         // tuple slots
    double step_seconds = 0.1;            // s
    std::uint32_t bandwidth_cap = 570;    // bytes per step
    double density = 1.0;                 // robots / m^2
    double speed = 0.0;                   // m/s
    double load_factor = 0.8;
    double sensing_range = 1.0;           // m
    std::uint32_t n_event_types = 12;
    double event_rate = 5.0;              // events / s
    double query_rate = 1.0;              // queries / s, swarm-wide
    HashMode hash_mode = HashMode::category;
    bool replication_enabled = false;
    std::uint64_t rng_seed = 1;

    // Extensions.
    double spatial_scale = 1.0;
    double heading_jitter = 0.3;          // rad per step
    EventField event_field = EventField::uniform;
    double disc_radius = 8.0;             // m
    QueryMix query_mix = QueryMix::spatial_get;
    std::vector<double> query_radii{0.5, 1.0, 2.0, 4.0};
    std::uint32_t query_cache_size = 256;
    std::uint32_t reply_cache_size = 256;
    std::uint32_t collection_window = 150; // steps
    std::uint32_t quiescence_steps = 200;
    double safe_radius = 1.0;             // m
    std::uint32_t heartbeat_period = 5;   // steps
    std::uint32_t heartbeat_timeout = 30; // steps
    std::uint32_t max_steps = 10000;

    bool operator==(const SimConfig&) const = default;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses flat `key=value` text. Blank lines and `#` comments are skipped.
/// Keys not naming a SimConfig field raise ConfigError.
SimConfig parse_config(std::istream& in);
SimConfig parse_config_string(const std::string& text);
SimConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` assignment on top of `cfg`.
void set_config_value(SimConfig& cfg, const std::string& key, const std::string& value);

/// Renders every field, one per line, in a form parse_config reads back exactly.
std::string to_config_text(const SimConfig& cfg);

std::vector<std::string> validate_config(const SimConfig& cfg);

/// Side of the square arena imposing the requested density. The arena is
/// [-side/2, side/2]^2 with the origin at its center.
double arena_side(std::uint32_t n_robots, double density);

std::string to_string(HashMode mode);
std::string to_string(EventField field);
std::string to_string(QueryMix mix);

} // namespace swarmmesh
