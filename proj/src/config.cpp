#include "swarmmesh/config.hpp"

#include "swarmmesh/hashing.hpp"
#include "swarmmesh/wire.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace swarmmesh {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T out{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError("invalid value for " + key + ": '" + text + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1")
        return true;
    if (text == "false" || text == "0")
        return false;
    throw ConfigError("invalid value for " + key + ": '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_number<double>(key, trim(item)));
    return out;
}

struct Field {
    const char* name;
    std::function<std::string(const SimConfig&)> get;
    std::function<void(SimConfig&, const std::string&)> set;
};

#define SM_UINT(member)                                                                  \
    Field{#member, [](const SimConfig& c) { return std::to_string(c.member); },          \
          [](SimConfig& c, const std::string& v) {                                       \
              c.member = parse_number<decltype(c.member)>(#member, v);                   \
          }}
#define SM_DOUBLE(member)                                                                \
    Field{#member, [](const SimConfig& c) { return format_double(c.member); },           \
          [](SimConfig& c, const std::string& v) { c.member = parse_number<double>(#member, v); }}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table{
        SM_UINT(n_robots),
        SM_DOUBLE(comm_range_C),
        SM_UINT(memory_M),
        SM_UINT(storage_S),
        SM_UINT(routing_R),
        SM_DOUBLE(step_seconds),
        SM_UINT(bandwidth_cap),
        SM_DOUBLE(density),
        SM_DOUBLE(speed),
        SM_DOUBLE(load_factor),
        SM_DOUBLE(sensing_range),
        SM_UINT(n_event_types),
        SM_DOUBLE(event_rate),
        SM_DOUBLE(query_rate),
        Field{"hash_mode", [](const SimConfig& c) { return to_string(c.hash_mode); },
              [](SimConfig& c, const std::string& v) {
                  if (v == "category")
                      c.hash_mode = HashMode::category;
                  else if (v == "spatial")
                      c.hash_mode = HashMode::spatial;
                  else
                      throw ConfigError("invalid value for hash_mode: '" + v + "'");
              }},
        Field{"replication_enabled",
              [](const SimConfig& c) { return std::string(c.replication_enabled ? "true" : "false"); },
              [](SimConfig& c, const std::string& v) {
                  c.replication_enabled = parse_bool("replication_enabled", v);
              }},
        SM_UINT(rng_seed),
        SM_DOUBLE(spatial_scale),
        SM_DOUBLE(heading_jitter),
        Field{"event_field", [](const SimConfig& c) { return to_string(c.event_field); },
              [](SimConfig& c, const std::string& v) {
                  if (v == "uniform")
                      c.event_field = EventField::uniform;
                  else if (v == "disc")
                      c.event_field = EventField::disc;
                  else
                      throw ConfigError("invalid value for event_field: '" + v + "'");
              }},
        SM_DOUBLE(disc_radius),
        Field{"query_mix", [](const SimConfig& c) { return to_string(c.query_mix); },
              [](SimConfig& c, const std::string& v) {
                  if (v == "spatial_get")
                      c.query_mix = QueryMix::spatial_get;
                  else if (v == "mixed")
                      c.query_mix = QueryMix::mixed;
                  else
                      throw ConfigError("invalid value for query_mix: '" + v + "'");
              }},
        Field{"query_radii",
              [](const SimConfig& c) {
                  std::string out;
                  for (std::size_t i = 0; i < c.query_radii.size(); ++i) {
                      if (i)
                          out += ',';
                      out += format_double(c.query_radii[i]);
                  }
                  return out;
              },
              [](SimConfig& c, const std::string& v) { c.query_radii = parse_list("query_radii", v); }},
        SM_UINT(query_cache_size),
        SM_UINT(reply_cache_size),
        SM_UINT(collection_window),
        SM_UINT(quiescence_steps),
        SM_DOUBLE(safe_radius),
        SM_UINT(heartbeat_period),
        SM_UINT(heartbeat_timeout),
        SM_UINT(max_steps),
    };
    return table;
}

#undef SM_UINT
#undef SM_DOUBLE

} // namespace

void set_config_value(SimConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.name; });
    if (it == table.end())
        throw ConfigError("unknown config key: '" + key + "'");
    it->set(cfg, value);
}

SimConfig parse_config(std::istream& in)
{
    SimConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string body = trim(line);
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        set_config_value(cfg, trim(std::string_view(body).substr(0, eq)),
                         trim(std::string_view(body).substr(eq + 1)));
    }
    return cfg;
}

SimConfig parse_config_string(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

SimConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    return parse_config(in);
}

std::string to_config_text(const SimConfig& cfg)
{
    std::string out;
    for (const auto& f : fields()) {
        out += f.name;
        out += '=';
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

std::vector<std::string> validate_config(const SimConfig& cfg)
{
    std::vector<std::string> out;
    auto require = [&](bool ok, std::string msg) {
        if (!ok)
            out.push_back(std::move(msg));
    };

    require(cfg.n_robots > 0, "n_robots must be positive");
    require(cfg.memory_M > 0, "memory_M must be positive");
    require(cfg.storage_S > 0, "storage_S must be positive");
    require(cfg.routing_R > 0, "routing_R must be positive");
    require(cfg.n_event_types > 0, "n_event_types must be positive");
    require(cfg.storage_S + cfg.routing_R == cfg.memory_M, "S+R ≠ M");
    require(cfg.comm_range_C > 0, "comm_range_C must be positive");
    require(cfg.step_seconds > 0, "step_seconds must be positive");
    require(cfg.density > 0, "density must be positive");
    require(cfg.speed >= 0, "speed must be non-negative");
    require(cfg.load_factor > 0, "load_factor must be positive");
    require(cfg.sensing_range > 0, "sensing_range must be positive");
    require(cfg.event_rate >= 0, "event_rate must be non-negative");
    require(cfg.query_rate >= 0, "query_rate must be non-negative");
    require(cfg.spatial_scale > 0, "spatial_scale must be positive");
    require(cfg.disc_radius > 0, "disc_radius must be positive");
    require(cfg.safe_radius > 0, "safe_radius must be positive");
    require(cfg.heartbeat_period > 0, "heartbeat_period must be positive");
    require(cfg.heartbeat_timeout > 0, "heartbeat_timeout must be positive");
    require(cfg.query_cache_size > 0, "query_cache_size must be positive");
    require(cfg.reply_cache_size > 0, "reply_cache_size must be positive");
    require(!cfg.query_radii.empty(), "query_radii must not be empty");
    for (double r : cfg.query_radii)
        require(r > 0, "query radius must be positive");
    require(cfg.bandwidth_cap >= max_fixed_message_size(),
            "bandwidth_cap below the largest fixed-size message (" +
                std::to_string(max_fixed_message_size()) + " B)");

    if (cfg.n_robots > 0 && cfg.density > 0 && cfg.n_event_types > 0) {
        const std::uint64_t bound = std::uint64_t{cfg.memory_M} * (cfg.n_robots - 1);
        if (std::uint64_t{max_hash(cfg.hash_mode, cfg)} >= bound)
            out.push_back("hash range exceeds max M·(N−1): max ρ " +
                          std::to_string(max_hash(cfg.hash_mode, cfg)) + " ≥ " + std::to_string(bound));
    }
    return out;
}

double arena_side(std::uint32_t n_robots, double density)
{
    return std::sqrt(static_cast<double>(n_robots) / density);
}

std::string to_string(HashMode mode)
{
    return mode == HashMode::category ? "category" : "spatial";
}

std::string to_string(EventField field)
{
    return field == EventField::uniform ? "uniform" : "disc";
}

std::string to_string(QueryMix mix)
{
    return mix == QueryMix::spatial_get ? "spatial_get" : "mixed";
}

} // namespace swarmmesh
