#pragma once

#include "swarmmesh/core.hpp"
#include "swarmmesh/wire.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace swarmmesh {

struct WriteRecord {
    TupleId tau;
    Rho rho = 0;
    Step step = 0;
    bool new_tuple = true; // false for a later version of an existing τ
};

struct DiscardRecord {
    TupleId tau;
    Rho rho = 0;
    Step step = 0;
};

struct EraseRecord {
    TupleId tau;
    Step step = 0;
    bool by_user = false;
};

struct SettleRecord {
    TupleId tau;
    Rho rho = 0;
    Step steps_to_settle = 0;
    std::uint32_t hops = 0;
};

struct QueryRecord {
    QueryId qid;
    QueryOp op = QueryOp::get;
    bool spatial = true;
    double radius = 0.0;
    Step emit_step = 0;
    std::optional<Step> last_reply_step;
    std::size_t replies_expected = 0; // tuples the brute-force oracle expects (get)
    std::size_t replies_received = 0; // of those, how many came back
    bool completed = false;
};

struct StoredRouted {
    Step step = 0;
    std::size_t stored = 0;
    std::size_t routed = 0;
};

/// Append-only record of one run.
struct MetricsLog {
    std::vector<WriteRecord> writes;
    std::vector<DiscardRecord> discards;
    std::vector<EraseRecord> erases;
    std::vector<SettleRecord> store_settled;
    std::vector<QueryRecord> query_events;
    std::vector<std::vector<std::uint32_t>> bandwidth; // [step][robot index] bytes sent
    std::vector<std::vector<Delta>> delta_samples;     // [step] δ of every live robot
    std::vector<Rho> rho_samples;                      // one per new tuple
    std::vector<StoredRouted> stored_routed;

    std::size_t events_generated = 0;
    std::size_t events_pending = 0; // generated but never detected by a robot
    std::size_t lost = 0;           // active tuples held by robots that were removed
    std::size_t restored = 0;       // replicas promoted to active copies

    std::vector<Step> consistency_violations; // steps with a duplicated active τ
    std::vector<Step> conservation_violations;
    std::size_t max_occupancy = 0;
    std::size_t max_step_bytes = 0;
};

/// (writes − discards − user erases) / writes over new tuples; absent with no writes.
std::optional<double> retention(const MetricsLog& log);

/// Per get() query: fraction of the oracle's expected tuples that came back.
std::vector<double> availability(const MetricsLog& log);

struct ActiveInstance {
    TupleId tau;
    Step timestamp = 0;
    RobotId holder;
};

/// Every τ with more than one active instance.
std::vector<TupleId> consistency_check(std::span<const ActiveInstance> instances);

struct HistBin {
    double low = 0;
    double high = 0;
    std::size_t count = 0;
};

std::vector<HistBin> histogram(std::span<const double> values, double bin_width);

struct Histograms {
    std::vector<HistBin> delta;
    std::vector<HistBin> rho;
};

Histograms histograms(const MetricsLog& log, double delta_bin, double rho_bin);

struct StoreLatencyBin {
    Rho low = 0;
    Rho high = 0;
    double median_steps = 0;
    double median_hops = 0;
    std::size_t settled = 0;
};

struct QueryLatencyBin {
    double radius = 0;
    double median_steps = 0;
    std::size_t completed = 0; // queries with at least one reply
    std::size_t issued = 0;
};

struct LatencyReport {
    std::vector<StoreLatencyBin> store;
    std::size_t unsettled = 0;
    std::vector<QueryLatencyBin> query;
};

LatencyReport latency_report(const MetricsLog& log, Rho rho_bin);

/// Stored fraction of all held active tuples, one sample per step with any.
std::vector<std::pair<Step, double>> stored_vs_routed(const MetricsLog& log);

struct BandwidthSummary {
    double median = 0; // over every (robot, step) sample
    double mean = 0;
    std::size_t max = 0;
};

BandwidthSummary bandwidth_summary(const MetricsLog& log);

double median(std::vector<double> values);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// series is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct CsvOptions {
    Rho rho_bin = 10;
    double delta_bin = 10;
};

/// Writes retention.csv, availability.csv, delta_hist.csv, rho_hist.csv,
/// store_latency.csv, query_latency.csv, bandwidth.csv and stored_routed.csv.
void write_metric_csvs(const MetricsLog& log, const std::filesystem::path& dir, const CsvOptions& opts);

} // namespace swarmmesh
