#pragma once

#include "swarmmesh/config.hpp"
#include "swarmmesh/sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace swarmmesh {

struct RunSummary {
    std::optional<double> retention;
    double median_bandwidth = 0;
    std::size_t max_step_bytes = 0;
    std::size_t consistency_violations = 0;
    std::size_t conservation_violations = 0;
    std::size_t events_pending = 0;
    Step steps = 0;
};

RunSummary summarize(const World& world);

void write_trace_csv(const World& world, const std::filesystem::path& path);

/// Runs one simulation to completion and writes config.cfg, the metric
/// CSVs, trace.csv and summary.json into `out`.
RunSummary run_single(const SimConfig& cfg, const std::filesystem::path& out, bool trace = true);

struct PlanCell {
    std::string label;
    std::vector<std::pair<std::string, std::string>> axes; // grid coordinates of this cell
    SimConfig config;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out_dir;
};

struct ExperimentPlan {
    std::string name;
    std::vector<PlanCell> cells;
};

/// Reads a JSON plan: `base` settings, a `seeds` list, and a `grid` of
/// setting → value list expanded as a cartesian product. Cells land under
/// `out_root`/<label>. Throws ConfigError on a bad plan.
ExperimentPlan parse_plan(const std::string& json_text, const std::filesystem::path& out_root);
ExperimentPlan load_plan(const std::filesystem::path& path, const std::filesystem::path& out_root);

struct SeedResult {
    std::uint64_t seed = 0;
    std::optional<RunSummary> summary;
    std::string error;
    bool resumed = false;
};

struct CellResult {
    const PlanCell* cell = nullptr;
    std::vector<SeedResult> seeds;
};

struct SweepReport {
    std::vector<CellResult> cells;
    std::size_t resumed = 0;
    std::size_t failed = 0;
};

/// Runs every (cell, seed). Seeds whose summary.json already exists are read
/// back instead of rerun; a failing seed is recorded and the sweep goes on.
SweepReport sweep(const ExperimentPlan& plan, unsigned jobs, std::ostream* progress = nullptr);

/// Rows: hash mode × topology × {min, mean, max}; one column per load factor.
void write_retention_table(const SweepReport& report, const std::filesystem::path& path);

/// Summary table over every run found under `dir`.
std::string report(const std::filesystem::path& dir);

} // namespace swarmmesh
