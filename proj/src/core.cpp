#include "swarmmesh/core.hpp"

#include <cmath>

namespace swarmmesh {

double distance(Vec2 a, Vec2 b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double norm(Vec2 v)
{
    return std::hypot(v.x, v.y);
}

std::string to_string(RobotId id)
{
    return std::to_string(id.value);
}

std::string to_string(const TupleId& id)
{
    return std::to_string(id.writer.value) + ":" + std::to_string(id.seq);
}

std::string to_string(const QueryId& id)
{
    return std::to_string(id.origin.value) + "#" + std::to_string(id.seq);
}

} // namespace swarmmesh
