#include "swarmmesh/config.hpp"
#include "swarmmesh/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace swarmmesh;

namespace {

constexpr int exit_invalid_config = 2;

fs::path default_out_root()
{
    if (const char* env = std::getenv("SWARMMESH_OUT"); env && *env)
        return env;
    return "out";
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, fs::path out,
            const std::vector<std::string>& overrides, bool trace)
{
    SimConfig cfg;
    try {
        if (!config_path.empty())
            cfg = load_config(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected key=value, got '" + kv + "'");
            set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << '\n';
        return exit_invalid_config;
    }
    if (seed)
        cfg.rng_seed = *seed;
    if (const auto problems = validate_config(cfg); !problems.empty()) {
        std::cerr << "invalid config:\n";
        for (const auto& p : problems)
            std::cerr << "  " << p << '\n';
        return exit_invalid_config;
    }
    if (out.empty())
        out = default_out_root() / ("run-seed-" + std::to_string(cfg.rng_seed));

    const RunSummary s = run_single(cfg, out, trace);
    std::cout << "steps " << s.steps << ", retention "
              << (s.retention ? std::to_string(*s.retention) : std::string("n/a")) << ", median bandwidth "
              << s.median_bandwidth << " B, max " << s.max_step_bytes << " B/step\n"
              << "outputs in " << out.string() << '\n';
    return 0;
}

int cmd_sweep(const std::string& plan_path, fs::path out, unsigned jobs)
{
    if (out.empty())
        out = default_out_root();
    ExperimentPlan plan;
    try {
        plan = load_plan(plan_path, out);
    } catch (const ConfigError& e) {
        std::cerr << "invalid plan: " << e.what() << '\n';
        return exit_invalid_config;
    }
    fs::create_directories(out);
    const SweepReport r = sweep(plan, jobs, &std::cerr);
    write_retention_table(r, out / "retention_table.csv");
    std::cout << report(out);
    std::cerr << r.resumed << " runs reused, " << r.failed << " failed\n";
    return r.failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"SwarmMesh tuple storage simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
    bool no_trace = false;
    auto* run = app.add_subcommand("run", "Run one simulation and write its metric CSVs");
    run->add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override rng_seed");
    run->add_option("--out", out, "Output directory");
    run->add_option("--set", overrides, "Override one setting, key=value");
    run->add_flag("--no-trace", no_trace, "Skip trace.csv");

    std::string plan_path;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    auto* sw = app.add_subcommand("sweep", "Run every cell and seed of a JSON plan");
    sw->add_option("--plan", plan_path, "Plan file")->required()->check(CLI::ExistingFile);
    sw->add_option("--out", out, "Output root");
    sw->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

    auto* rep = app.add_subcommand("report", "Summarize every run under a directory");
    rep->add_option("--out", out, "Directory to scan");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, seed, out, overrides, !no_trace);
        if (sw->parsed())
            return cmd_sweep(plan_path, out, jobs);
        if (rep->parsed()) {
            std::cout << report(out.empty() ? default_out_root() : fs::path(out));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
