#include "signal_dojo/report.hpp"

#include <charconv>
#include <cmath>

#include "json.hpp"

namespace signal_dojo {

namespace {

MetricStats stats(const std::vector<MetricsReport>& reports, double MetricsReport::*field) {
    MetricStats s;
    if (reports.empty()) return s;
    for (const auto& r : reports) s.mean += r.*field;
    s.mean /= static_cast<double>(reports.size());
    if (reports.size() > 1) {
        double ss = 0.0;
        for (const auto& r : reports) ss += (r.*field - s.mean) * (r.*field - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(reports.size() - 1));
    }
    return s;
}

}  // namespace

AggregateReport aggregate(const std::vector<MetricsReport>& reports) {
    AggregateReport a;
    a.runs = reports.size();
    a.avg_travel_time = stats(reports, &MetricsReport::avg_travel_time);
    a.throughput_per_hour = stats(reports, &MetricsReport::throughput_per_hour);
    a.mean_queue = stats(reports, &MetricsReport::mean_queue);
    a.mean_delay = stats(reports, &MetricsReport::mean_delay);
    a.mean_accumulated_waiting = stats(reports, &MetricsReport::mean_accumulated_waiting);
    a.co2_rate = stats(reports, &MetricsReport::co2_rate);
    return a;
}

std::string format_number(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string report_csv_header() {
    return "scenario,controller,seed,avg_travel_time,throughput_per_hour,mean_queue,mean_delay,"
           "mean_accumulated_waiting,co2_rate,completed,unfinished,spawned\n";
}

std::string report_csv_row(const std::string& scenario, const std::string& controller, std::uint64_t seed,
                           const MetricsReport& r) {
    return scenario + ',' + controller + ',' + std::to_string(seed) + ',' + format_number(r.avg_travel_time) + ',' +
           format_number(r.throughput_per_hour) + ',' + format_number(r.mean_queue) + ',' +
           format_number(r.mean_delay) + ',' + format_number(r.mean_accumulated_waiting) + ',' +
           format_number(r.co2_rate) + ',' + std::to_string(r.completed) + ',' + std::to_string(r.unfinished) + ',' +
           std::to_string(r.spawned) + '\n';
}

std::string aggregate_csv_rows(const std::string& scenario, const std::string& controller,
                               const AggregateReport& a) {
    auto row = [&](const char* label, auto pick) {
        return scenario + ',' + controller + ',' + label + ',' + format_number(pick(a.avg_travel_time)) + ',' +
               format_number(pick(a.throughput_per_hour)) + ',' + format_number(pick(a.mean_queue)) + ',' +
               format_number(pick(a.mean_delay)) + ',' + format_number(pick(a.mean_accumulated_waiting)) + ',' +
               format_number(pick(a.co2_rate)) + ",,,\n";
    };
    return row("mean", [](const MetricStats& s) { return s.mean; }) +
           row("std", [](const MetricStats& s) { return s.std; });
}

std::string report_json(const MetricsReport& r) {
    nlohmann::ordered_json doc = {{"avg_travel_time", r.avg_travel_time},
                                  {"throughput_per_hour", r.throughput_per_hour},
                                  {"mean_queue", r.mean_queue},
                                  {"mean_delay", r.mean_delay},
                                  {"mean_accumulated_waiting", r.mean_accumulated_waiting},
                                  {"co2_rate", r.co2_rate},
                                  {"completed", r.completed},
                                  {"unfinished", r.unfinished},
                                  {"spawned", r.spawned},
                                  {"duration", r.duration}};
    return doc.dump(2);
}

}  // namespace signal_dojo
