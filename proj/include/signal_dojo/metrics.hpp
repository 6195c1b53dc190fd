#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "signal_dojo/dynamics.hpp"

namespace signal_dojo {

struct MetricsReport {
    double avg_travel_time = 0.0;           // s, completed trips only
    double throughput_per_hour = 0.0;       // veh/h
    double mean_queue = 0.0;                // vehicles
    double mean_delay = 0.0;                // [0, 1]
    double mean_accumulated_waiting = 0.0;  // s
    double co2_rate = 0.0;                  // g/s
    std::uint64_t completed = 0;
    std::uint64_t unfinished = 0;
    std::uint64_t spawned = 0;
    double duration = 0.0;  // s

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Instantaneous CO2 in mg/s: c0 + c1*v*a + c2*v*a^2 + c3*v + c4*v^2 + c5*v^3, floored at 0.
struct EmissionCoeffs {
    std::array<double, 6> c{1100.0, 435.0, 0.0, 43.5, 0.5, 0.12};

    friend bool operator==(const EmissionCoeffs&, const EmissionCoeffs&) = default;
};

/// Parses a coefficient document of the form {"c0": ..., ..., "c5": ...}.
EmissionCoeffs load_emission_coeffs(const std::string& text);

/// 1 - sum(v) / (n * v_max) with speeds clamped to [0, v_max]; 0 for an empty list.
double delay(std::span<const double> speeds, double v_max);

double co2_rate(double v, double a, const EmissionCoeffs& coeffs);

/// Per-episode accumulator, fed once per physics sub-step.
class MetricsRecorder {
public:
    explicit MetricsRecorder(EmissionCoeffs coeffs = {}) : coeffs_(coeffs) {}

    void reset();
    void record_step(const World& world);

    std::int64_t recorded_ms() const noexcept { return recorded_ms_; }
    std::size_t samples() const noexcept { return samples_; }
    double last_queue() const noexcept { return last_queue_; }
    double last_delay() const noexcept { return last_delay_; }
    double last_waiting() const noexcept { return last_waiting_; }

    /// Throws Error(episode_not_complete) if fewer than `duration_ms` were recorded.
    MetricsReport finalize(const World& world, std::int64_t duration_ms) const;

private:
    EmissionCoeffs coeffs_;
    std::int64_t recorded_ms_ = 0;
    std::size_t samples_ = 0;
    double queue_sum_ = 0.0;
    double delay_sum_ = 0.0;
    double waiting_sum_ = 0.0;
    double co2_mg_ = 0.0;
    double travel_sum_ = 0.0;
    std::uint64_t completed_ = 0;
    double last_queue_ = 0.0;
    double last_delay_ = 0.0;
    double last_waiting_ = 0.0;
};

}  // namespace signal_dojo
