#include "swarmmesh/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace swarmmesh {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename J>
std::string setting_text(const std::string& key, const J& v)
{
    if (v.is_string())
        return v.template get<std::string>();
    if (v.is_boolean())
        return v.template get<bool>() ? "true" : "false";
    if (v.is_number())
        return v.dump();
    if (v.is_array()) {
        std::string out;
        for (const auto& item : v) {
            if (!out.empty())
                out += ',';
            out += setting_text(key, item);
        }
        return out;
    }
    throw ConfigError("unsupported value for " + key + ": " + v.dump());
}

json to_json(const RunSummary& s)
{
    json j;
    j["retention"] = s.retention ? json(*s.retention) : json(nullptr);
    j["median_bandwidth"] = s.median_bandwidth;
    j["max_step_bytes"] = s.max_step_bytes;
    j["consistency_violations"] = s.consistency_violations;
    j["conservation_violations"] = s.conservation_violations;
    j["events_pending"] = s.events_pending;
    j["steps"] = s.steps;
    return j;
}

RunSummary from_json(const json& j)
{
    RunSummary s;
    if (!j.at("retention").is_null())
        s.retention = j.at("retention").get<double>();
    s.median_bandwidth = j.at("median_bandwidth").get<double>();
    s.max_step_bytes = j.at("max_step_bytes").get<std::size_t>();
    s.consistency_violations = j.at("consistency_violations").get<std::size_t>();
    s.conservation_violations = j.at("conservation_violations").get<std::size_t>();
    s.events_pending = j.at("events_pending").get<std::size_t>();
    s.steps = j.at("steps").get<Step>();
    return s;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

struct Stats {
    double min = 0, mean = 0, max = 0;
    std::size_t n = 0;
};

std::optional<Stats> stats(const std::vector<double>& v)
{
    if (v.empty())
        return std::nullopt;
    Stats s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    s.n = v.size();
    return s;
}

} // namespace

RunSummary summarize(const World& world)
{
    const MetricsLog& log = world.log();
    RunSummary s;
    s.retention = retention(log);
    s.median_bandwidth = bandwidth_summary(log).median;
    s.max_step_bytes = log.max_step_bytes;
    s.consistency_violations = log.consistency_violations.size();
    s.conservation_violations = log.conservation_violations.size();
    s.events_pending = log.events_pending;
    s.steps = world.clock();
    return s;
}

void write_trace_csv(const World& world, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "step,robot,event_kind,detail\n";
    for (const auto& row : world.trace())
        out << row.step << ',' << row.robot.value << ',' << row.kind << ',' << row.detail << '\n';
}

RunSummary run_single(const SimConfig& cfg, const fs::path& out, bool trace)
{
    fs::create_directories(out);
    WorldOptions opts;
    opts.trace = trace;
    World world(cfg, opts);
    world.run();

    write_text(out / "config.cfg", to_config_text(cfg));
    CsvOptions csv;
    csv.rho_bin = cfg.hash_mode == HashMode::category ? 10 : 50;
    write_metric_csvs(world.log(), out, csv);
    if (trace)
        write_trace_csv(world, out / "trace.csv");
    const RunSummary s = summarize(world);
    // Written last: its presence marks the run as complete.
    write_text(out / "summary.json", to_json(s).dump(2) + "\n");
    return s;
}

ExperimentPlan parse_plan(const std::string& json_text, const fs::path& out_root)
{
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("plan is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("plan must be a JSON object");

    ExperimentPlan plan;
    plan.name = doc.value("name", std::string("plan"));

    SimConfig base;
    if (doc.contains("base"))
        for (const auto& [k, v] : doc["base"].items())
            set_config_value(base, k, setting_text(k, v));

    std::vector<std::uint64_t> seeds;
    if (doc.contains("seeds"))
        for (const auto& s : doc["seeds"])
            seeds.push_back(s.get<std::uint64_t>());
    if (seeds.empty())
        for (std::uint64_t s = 1; s <= 10; ++s)
            seeds.push_back(s);

    std::vector<std::pair<std::string, std::vector<std::string>>> grid;
    if (doc.contains("grid")) {
        for (const auto& [k, v] : doc["grid"].items()) {
            std::vector<std::string> values;
            for (const auto& item : v)
                values.push_back(setting_text(k, item));
            if (values.empty())
                throw ConfigError("grid axis " + k + " has no values");
            grid.emplace_back(k, std::move(values));
        }
    }

    std::vector<std::size_t> idx(grid.size(), 0);
    bool more = true;
    while (more) {
        PlanCell cell;
        cell.config = base;
        cell.seeds = seeds;
        for (std::size_t a = 0; a < grid.size(); ++a) {
            const auto& [key, values] = grid[a];
            set_config_value(cell.config, key, values[idx[a]]);
            cell.axes.emplace_back(key, values[idx[a]]);
            if (!cell.label.empty())
                cell.label += '_';
            cell.label += key + '=' + values[idx[a]];
        }
        if (cell.label.empty())
            cell.label = "cell";
        cell.out_dir = out_root / cell.label;
        for (const auto& problem : validate_config(cell.config))
            throw ConfigError("cell " + cell.label + ": " + problem);
        plan.cells.push_back(std::move(cell));

        // Odometer over the grid axes, last axis fastest.
        more = false;
        for (std::size_t a = grid.size(); a-- > 0;) {
            if (++idx[a] < grid[a].second.size()) {
                more = true;
                break;
            }
            idx[a] = 0;
        }
    }
    return plan;
}

ExperimentPlan load_plan(const fs::path& path, const fs::path& out_root)
{
    return parse_plan(read_text(path), out_root);
}

SweepReport sweep(const ExperimentPlan& plan, unsigned jobs, std::ostream* progress)
{
    SweepReport report;
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    for (std::size_t c = 0; c < plan.cells.size(); ++c) {
        CellResult cr;
        cr.cell = &plan.cells[c];
        for (std::size_t s = 0; s < plan.cells[c].seeds.size(); ++s) {
            cr.seeds.push_back(SeedResult{plan.cells[c].seeds[s], std::nullopt, {}, false});
            tasks.emplace_back(c, s);
        }
        report.cells.push_back(std::move(cr));
    }

    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&] {
        while (true) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size())
                return;
            const auto [c, s] = tasks[t];
            const PlanCell& cell = plan.cells[c];
            SeedResult& slot = report.cells[c].seeds[s];
            const fs::path dir = cell.out_dir / ("seed-" + std::to_string(slot.seed));
            try {
                if (fs::exists(dir / "summary.json")) {
                    slot.summary = from_json(json::parse(read_text(dir / "summary.json")));
                    slot.resumed = true;
                } else {
                    SimConfig cfg = cell.config;
                    cfg.rng_seed = slot.seed;
                    slot.summary = run_single(cfg, dir, false);
                }
            } catch (const std::exception& e) {
                slot.error = e.what();
            }
            if (progress) {
                std::lock_guard lock(io);
                *progress << cell.label << " seed " << slot.seed << ": "
                          << (!slot.error.empty()   ? "failed (" + slot.error + ")"
                              : slot.resumed        ? std::string("skipped, already done")
                              : slot.summary->retention ? "retention " + fmt(*slot.summary->retention)
                                                        : std::string("no writes"))
                          << '\n';
            }
        }
    };

    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i + 1 < n; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    for (const auto& cr : report.cells)
        for (const auto& s : cr.seeds) {
            report.resumed += s.resumed ? 1 : 0;
            report.failed += s.error.empty() ? 0 : 1;
        }
    return report;
}

void write_retention_table(const SweepReport& report, const fs::path& path)
{
    struct Row {
        std::string hash_mode, topology, other;
        auto operator<=>(const Row&) const = default;
    };
    std::vector<double> lfs;
    std::map<Row, std::map<double, std::vector<double>>> table;
    for (const auto& cr : report.cells) {
        const SimConfig& cfg = cr.cell->config;
        Row row{to_string(cfg.hash_mode), cfg.speed == 0.0 ? "static" : "dynamic", {}};
        for (const auto& [k, v] : cr.cell->axes) {
            if (k == "hash_mode" || k == "speed" || k == "load_factor")
                continue;
            if (!row.other.empty())
                row.other += ';';
            row.other += k + '=' + v;
        }
        if (std::find(lfs.begin(), lfs.end(), cfg.load_factor) == lfs.end())
            lfs.push_back(cfg.load_factor);
        auto& values = table[row][cfg.load_factor];
        for (const auto& s : cr.seeds)
            if (s.summary && s.summary->retention)
                values.push_back(*s.summary->retention);
    }
    std::sort(lfs.begin(), lfs.end());

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "hash_mode,topology,cell,stat";
    for (double lf : lfs)
        out << ',' << fmt(lf);
    out << '\n';
    for (const auto& [row, by_lf] : table) {
        for (const char* stat : {"min", "mean", "max"}) {
            out << row.hash_mode << ',' << row.topology << ',' << row.other << ',' << stat;
            for (double lf : lfs) {
                out << ',';
                auto it = by_lf.find(lf);
                if (it == by_lf.end())
                    continue;
                if (auto st = stats(it->second)) {
                    const std::string_view s = stat;
                    out << fmt(s == "min" ? st->min : s == "mean" ? st->mean : st->max);
                }
            }
            out << '\n';
        }
    }
}

std::string report(const fs::path& dir)
{
    std::map<fs::path, std::vector<RunSummary>> cells;
    if (fs::exists(dir))
        for (const auto& entry : fs::recursive_directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
                const fs::path run = entry.path().parent_path();
                const fs::path cell = run == dir ? run : run.parent_path();
                cells[fs::relative(cell, dir)].push_back(from_json(json::parse(read_text(entry.path()))));
            }

    std::ostringstream out;
    out << "cell,runs,retention_min,retention_mean,retention_max,median_bandwidth,max_step_bytes,"
           "consistency_violations,conservation_violations\n";
    for (const auto& [cell, runs] : cells) {
        std::vector<double> ret;
        std::vector<double> bw;
        std::size_t max_bytes = 0, cons = 0, audit = 0;
        for (const auto& r : runs) {
            if (r.retention)
                ret.push_back(*r.retention);
            bw.push_back(r.median_bandwidth);
            max_bytes = std::max(max_bytes, r.max_step_bytes);
            cons += r.consistency_violations;
            audit += r.conservation_violations;
        }
        const auto st = stats(ret);
        out << cell.generic_string() << ',' << runs.size() << ',' << (st ? fmt(st->min) : "") << ','
            << (st ? fmt(st->mean) : "") << ',' << (st ? fmt(st->max) : "") << ',' << fmt(median(bw)) << ','
            << max_bytes << ',' << cons << ',' << audit << '\n';
    }
    if (fs::exists(dir / "retention_table.csv"))
        out << '\n' << read_text(dir / "retention_table.csv");
    return out.str();
}

} // namespace swarmmesh
