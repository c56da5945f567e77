#include "swarmmesh/hashing.hpp"

#include <cmath>
#include <stdexcept>

namespace swarmmesh {

HashSettings hash_settings(const SimConfig& cfg)
{
    return HashSettings{cfg.hash_mode, cfg.n_event_types, cfg.spatial_scale};
}

Rho hash_category(std::uint32_t event_type, std::uint32_t n_event_types)
{
    if (event_type >= n_event_types)
        throw std::invalid_argument("event type " + std::to_string(event_type) + " outside [0, " +
                                    std::to_string(n_event_types) + ")");
    return 10 * event_type + 1;
}

Rho hash_spatial(Vec2 position, double scale)
{
    return static_cast<Rho>(std::lround(100.0 * scale * norm(position)));
}

Rho hash_event(const EventRecord& event, const HashSettings& settings)
{
    if (settings.mode == HashMode::category)
        return hash_category(event.event_type, settings.n_event_types);
    return hash_spatial(event.position, settings.spatial_scale);
}

Key make_key(RobotId writer, std::uint32_t write_count, const EventRecord& event,
             const HashSettings& settings)
{
    return Key{TupleId{writer, write_count}, hash_event(event, settings)};
}

Rho max_hash(HashMode mode, const SimConfig& cfg)
{
    if (mode == HashMode::category)
        return 10 * (cfg.n_event_types - 1) + 1;
    const double half = arena_side(cfg.n_robots, cfg.density) / 2.0;
    return hash_spatial(Vec2{half, half}, cfg.spatial_scale);
}

} // namespace swarmmesh
