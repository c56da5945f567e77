#pragma once

#include "swarmmesh/config.hpp"
#include "swarmmesh/core.hpp"

namespace swarmmesh {

struct EventRecord {
    Vec2 position;
    std::uint32_t event_type = 0;
    std::int64_t value = 0;
    Step detected_at = 0;
};

/// The subset of the configuration a robot needs to hash its writes.
struct HashSettings {
    HashMode mode = HashMode::category;
    std::uint32_t n_event_types = 12;
    double spatial_scale = 1.0;
};

HashSettings hash_settings(const SimConfig& cfg);

/// Linear importance ranking 10·type + 1. Throws std::invalid_argument when
/// `event_type` is not below `n_event_types`.
Rho hash_category(std::uint32_t event_type, std::uint32_t n_event_types = 12);

/// Distance from the origin in centimeters, rounded to the nearest integer.
Rho hash_spatial(Vec2 position, double scale = 1.0);

Rho hash_event(const EventRecord& event, const HashSettings& settings);

/// `write_count` is the writer's number of earlier puts, so the pair is unique.
Key make_key(RobotId writer, std::uint32_t write_count, const EventRecord& event,
             const HashSettings& settings);

/// Largest ρ the configured hash can produce. The spatial bound is the arena
/// corner, the farthest any event can lie from the origin.
Rho max_hash(HashMode mode, const SimConfig& cfg);

} // namespace swarmmesh
