#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace tapp {

// Fixed-precision formatting so file outputs are byte-stable.
inline std::string format_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct RunMetrics {
    double mean_ms = 0;
    double stddev_ms = 0;
    double p50_ms = 0;
    double p95_ms = 0;
    double max_ms = 0;
    int successes = 0;
    int failures = 0;
    int gateway_retries = 0;

    int total_requests() const { return successes + failures; }
};

// Sample statistics over one run's per-request latencies. Percentiles use
// the nearest-rank definition on the sorted sample.
inline RunMetrics summarize_latencies(std::vector<double> latencies_ms, int failures = 0,
                                      int gateway_retries = 0) {
    RunMetrics m;
    m.failures = failures;
    m.gateway_retries = gateway_retries;
    m.successes = static_cast<int>(latencies_ms.size());
    if (latencies_ms.empty()) return m;
    std::sort(latencies_ms.begin(), latencies_ms.end());
    double sum = 0;
    for (double v : latencies_ms) sum += v;
    m.mean_ms = sum / static_cast<double>(latencies_ms.size());
    double sq = 0;
    for (double v : latencies_ms) sq += (v - m.mean_ms) * (v - m.mean_ms);
    m.stddev_ms = latencies_ms.size() > 1
                      ? std::sqrt(sq / static_cast<double>(latencies_ms.size() - 1))
                      : 0.0;
    auto rank = [&](double q) {
        std::size_t r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(latencies_ms.size())));
        if (r == 0) r = 1;
        return latencies_ms[r - 1];
    };
    m.p50_ms = rank(0.50);
    m.p95_ms = rank(0.95);
    m.max_ms = latencies_ms.back();
    return m;
}

// All runs of one (variant, profile) pair plus the aggregate row: the
// average of the run averages and its standard deviation.
struct MetricsReport {
    std::string variant;
    std::string profile;
    std::vector<RunMetrics> runs;

    double mean_of_means() const {
        if (runs.empty()) return 0;
        double sum = 0;
        for (const auto& r : runs) sum += r.mean_ms;
        return sum / static_cast<double>(runs.size());
    }
    double stddev_of_means() const {
        if (runs.size() < 2) return 0;
        double mu = mean_of_means();
        double sq = 0;
        for (const auto& r : runs) sq += (r.mean_ms - mu) * (r.mean_ms - mu);
        return std::sqrt(sq / static_cast<double>(runs.size() - 1));
    }
    int total_failures() const {
        int n = 0;
        for (const auto& r : runs) n += r.failures;
        return n;
    }
    int total_retries() const {
        int n = 0;
        for (const auto& r : runs) n += r.gateway_retries;
        return n;
    }
};

// One table per profile, columns per variant, one row per run with
// `mean;stddev` cells and a final average-of-averages row.
inline std::string render_campaign_csv(const std::string& profile,
                                       const std::vector<MetricsReport>& columns) {
    std::string out = "run";
    for (const auto& col : columns) out += "," + col.variant;
    out += "\n";
    std::size_t n_runs = 0;
    for (const auto& col : columns) n_runs = std::max(n_runs, col.runs.size());
    for (std::size_t i = 0; i < n_runs; ++i) {
        out += std::to_string(i + 1);
        for (const auto& col : columns) {
            out += ",";
            if (i < col.runs.size())
                out += format_ms(col.runs[i].mean_ms) + ";" + format_ms(col.runs[i].stddev_ms);
        }
        out += "\n";
    }
    out += "average";
    for (const auto& col : columns)
        out += "," + format_ms(col.mean_of_means()) + ";" + format_ms(col.stddev_of_means());
    out += "\n";
    (void)profile;
    return out;
}

inline std::string render_pretty_table(const std::string& profile,
                                       const std::vector<MetricsReport>& columns) {
    std::string out = "profile: " + profile + "\n";
    for (const auto& col : columns) {
        out += "  " + col.variant + ": mean=" + format_ms(col.mean_of_means()) +
               "ms stddev=" + format_ms(col.stddev_of_means()) + "ms failures=" +
               std::to_string(col.total_failures()) + " retries=" + std::to_string(col.total_retries()) +
               "\n";
    }
    return out;
}

} // namespace tapp
