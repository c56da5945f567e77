#include "swarmmesh/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace swarmmesh {

namespace {

std::string fmt(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << header << '\n';
    return out;
}

std::vector<double> ranks(std::span<const double> v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
            ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

std::optional<double> retention(const MetricsLog& log)
{
    const auto writes = static_cast<double>(
        std::count_if(log.writes.begin(), log.writes.end(), [](const WriteRecord& w) { return w.new_tuple; }));
    if (writes == 0)
        return std::nullopt;
    const auto user_erases = static_cast<double>(
        std::count_if(log.erases.begin(), log.erases.end(), [](const EraseRecord& e) { return e.by_user; }));
    return (writes - static_cast<double>(log.discards.size()) - user_erases) / writes;
}

std::vector<double> availability(const MetricsLog& log)
{
    std::vector<double> out;
    for (const auto& q : log.query_events) {
        if (q.op != QueryOp::get || !q.completed)
            continue;
        out.push_back(q.replies_expected == 0
                          ? 1.0
                          : static_cast<double>(q.replies_received) / static_cast<double>(q.replies_expected));
    }
    return out;
}

std::vector<TupleId> consistency_check(std::span<const ActiveInstance> instances)
{
    std::vector<TupleId> taus;
    taus.reserve(instances.size());
    for (const auto& i : instances)
        taus.push_back(i.tau);
    std::sort(taus.begin(), taus.end());
    std::vector<TupleId> dup;
    for (std::size_t i = 1; i < taus.size(); ++i)
        if (taus[i] == taus[i - 1] && (dup.empty() || dup.back() != taus[i]))
            dup.push_back(taus[i]);
    return dup;
}

std::vector<HistBin> histogram(std::span<const double> values, double bin_width)
{
    if (values.empty())
        return {};
    if (bin_width <= 0)
        throw std::invalid_argument("bin width must be positive");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const auto first = static_cast<long long>(std::floor(*lo / bin_width));
    const auto last = static_cast<long long>(std::floor(*hi / bin_width));
    std::vector<HistBin> bins;
    for (long long b = first; b <= last; ++b)
        bins.push_back(HistBin{static_cast<double>(b) * bin_width, static_cast<double>(b + 1) * bin_width, 0});
    for (double v : values)
        ++bins[static_cast<std::size_t>(static_cast<long long>(std::floor(v / bin_width)) - first)].count;
    return bins;
}

Histograms histograms(const MetricsLog& log, double delta_bin, double rho_bin)
{
    std::vector<double> deltas;
    for (const auto& step : log.delta_samples)
        for (Delta d : step)
            deltas.push_back(d);
    std::vector<double> rhos(log.rho_samples.begin(), log.rho_samples.end());
    return Histograms{histogram(deltas, delta_bin), histogram(rhos, rho_bin)};
}

double median(std::vector<double> values)
{
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1)
        return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lower + upper) / 2.0;
}

double spearman(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        return std::numeric_limits<double>::quiet_NaN();
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0)
        return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

LatencyReport latency_report(const MetricsLog& log, Rho rho_bin)
{
    LatencyReport report;

    std::map<Rho, std::pair<std::vector<double>, std::vector<double>>> by_bin;
    for (const auto& s : log.store_settled) {
        auto& [steps, hops] = by_bin[s.rho / rho_bin];
        steps.push_back(s.steps_to_settle);
        hops.push_back(s.hops);
    }
    for (auto& [bin, data] : by_bin) {
        report.store.push_back(StoreLatencyBin{bin * rho_bin, (bin + 1) * rho_bin, median(data.first),
                                               median(data.second), data.first.size()});
    }
    const auto new_writes = static_cast<std::size_t>(
        std::count_if(log.writes.begin(), log.writes.end(), [](const WriteRecord& w) { return w.new_tuple; }));
    report.unsettled = new_writes > log.store_settled.size() ? new_writes - log.store_settled.size() : 0;

    std::map<double, std::pair<std::vector<double>, std::size_t>> by_radius;
    for (const auto& q : log.query_events) {
        if (!q.spatial || !q.completed)
            continue;
        auto& [lat, issued] = by_radius[q.radius];
        ++issued;
        if (q.last_reply_step)
            lat.push_back(static_cast<double>(*q.last_reply_step - q.emit_step));
    }
    for (auto& [r, data] : by_radius)
        report.query.push_back(QueryLatencyBin{r, median(data.first), data.first.size(), data.second});
    return report;
}

std::vector<std::pair<Step, double>> stored_vs_routed(const MetricsLog& log)
{
    std::vector<std::pair<Step, double>> out;
    for (const auto& s : log.stored_routed) {
        const std::size_t total = s.stored + s.routed;
        if (total == 0)
            continue;
        out.emplace_back(s.step, static_cast<double>(s.stored) / static_cast<double>(total));
    }
    return out;
}

BandwidthSummary bandwidth_summary(const MetricsLog& log)
{
    std::vector<double> all;
    BandwidthSummary s;
    for (const auto& step : log.bandwidth)
        for (auto b : step) {
            all.push_back(b);
            s.max = std::max<std::size_t>(s.max, b);
        }
    if (all.empty())
        return s;
    s.mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    s.median = median(std::move(all));
    return s;
}

void write_metric_csvs(const MetricsLog& log, const std::filesystem::path& dir, const CsvOptions& opts)
{
    std::filesystem::create_directories(dir);
    const auto report = latency_report(log, opts.rho_bin);

    {
        auto out = open_csv(dir / "retention.csv",
                            "writes,discards,user_erases,lost,restored,events_generated,events_pending,unsettled,"
                            "retention");
        const auto writes = std::count_if(log.writes.begin(), log.writes.end(),
                                          [](const WriteRecord& w) { return w.new_tuple; });
        const auto user = std::count_if(log.erases.begin(), log.erases.end(),
                                        [](const EraseRecord& e) { return e.by_user; });
        const auto r = retention(log);
        out << writes << ',' << log.discards.size() << ',' << user << ',' << log.lost << ',' << log.restored << ','
            << log.events_generated << ',' << log.events_pending << ',' << report.unsettled << ','
            << (r ? fmt(*r) : std::string{}) << '\n';
    }
    {
        auto out = open_csv(dir / "availability.csv", "qid,emit_step,expected,received,availability");
        for (const auto& q : log.query_events) {
            if (q.op != QueryOp::get || !q.completed)
                continue;
            const double a = q.replies_expected == 0 ? 1.0
                                                     : static_cast<double>(q.replies_received) /
                                                           static_cast<double>(q.replies_expected);
            out << to_string(q.qid) << ',' << q.emit_step << ',' << q.replies_expected << ',' << q.replies_received
                << ',' << fmt(a) << '\n';
        }
    }
    {
        const auto h = histograms(log, opts.delta_bin, opts.rho_bin);
        auto d = open_csv(dir / "delta_hist.csv", "bin_low,bin_high,count");
        for (const auto& b : h.delta)
            d << fmt(b.low) << ',' << fmt(b.high) << ',' << b.count << '\n';
        auto r = open_csv(dir / "rho_hist.csv", "bin_low,bin_high,count");
        for (const auto& b : h.rho)
            r << fmt(b.low) << ',' << fmt(b.high) << ',' << b.count << '\n';
    }
    {
        auto out = open_csv(dir / "store_latency.csv", "rho_low,rho_high,settled,median_steps,median_hops");
        for (const auto& b : report.store)
            out << b.low << ',' << b.high << ',' << b.settled << ',' << fmt(b.median_steps) << ','
                << fmt(b.median_hops) << '\n';
    }
    {
        auto out = open_csv(dir / "query_latency.csv", "radius,issued,completed,median_steps");
        for (const auto& b : report.query)
            out << fmt(b.radius) << ',' << b.issued << ',' << b.completed << ',' << fmt(b.median_steps) << '\n';
    }
    {
        auto out = open_csv(dir / "bandwidth.csv", "step,median_bytes,max_bytes,total_bytes");
        for (std::size_t s = 0; s < log.bandwidth.size(); ++s) {
            const auto& row = log.bandwidth[s];
            std::vector<double> v(row.begin(), row.end());
            const auto total = std::accumulate(row.begin(), row.end(), std::uint64_t{0});
            const auto mx = row.empty() ? 0u : *std::max_element(row.begin(), row.end());
            out << s << ',' << fmt(v.empty() ? 0.0 : median(std::move(v))) << ',' << mx << ',' << total << '\n';
        }
    }
    {
        auto out = open_csv(dir / "stored_routed.csv", "step,stored,routed,ratio");
        for (const auto& s : log.stored_routed) {
            const std::size_t total = s.stored + s.routed;
            out << s.step << ',' << s.stored << ',' << s.routed << ','
                << (total ? fmt(static_cast<double>(s.stored) / static_cast<double>(total)) : std::string{})
                << '\n';
        }
    }
}

} // namespace swarmmesh
