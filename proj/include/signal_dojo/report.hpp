#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "signal_dojo/metrics.hpp"

namespace signal_dojo {

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single value
};

/// Mean and spread of each metric across runs.
struct AggregateReport {
    MetricStats avg_travel_time;
    MetricStats throughput_per_hour;
    MetricStats mean_queue;
    MetricStats mean_delay;
    MetricStats mean_accumulated_waiting;
    MetricStats co2_rate;
    std::size_t runs = 0;
};

AggregateReport aggregate(const std::vector<MetricsReport>& reports);

/// Shortest round-trip decimal form.
std::string format_number(double value);

std::string report_csv_header();
std::string report_csv_row(const std::string& scenario, const std::string& controller, std::uint64_t seed,
                           const MetricsReport& report);
std::string aggregate_csv_rows(const std::string& scenario, const std::string& controller,
                               const AggregateReport& agg);
std::string report_json(const MetricsReport& report);

}  // namespace signal_dojo
