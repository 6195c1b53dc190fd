#include "signal_dojo/metrics.hpp"

#include <algorithm>
#include "json.hpp"

#include "signal_dojo/error.hpp"

namespace signal_dojo {

EmissionCoeffs load_emission_coeffs(const std::string& text) {
    EmissionCoeffs coeffs;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (std::size_t i = 0; i < coeffs.c.size(); ++i) {
            coeffs.c[i] = doc.at("c" + std::to_string(i)).get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("emission coefficients: ") + e.what());
    }
    if (coeffs.c[0] < 0.0) throw Error(ErrorCode::config_error, "idle emission c0 must be nonnegative");
    return coeffs;
}

double delay(std::span<const double> speeds, double v_max) {
    if (speeds.empty()) return 0.0;
    double sum = 0.0;
    for (double v : speeds) sum += std::clamp(v, 0.0, v_max);
    return 1.0 - sum / (static_cast<double>(speeds.size()) * v_max);
}

double co2_rate(double v, double a, const EmissionCoeffs& k) {
    const auto& c = k.c;
    return std::max(0.0, c[0] + c[1] * v * a + c[2] * v * a * a + c[3] * v + c[4] * v * v + c[5] * v * v * v);
}

void MetricsRecorder::reset() { *this = MetricsRecorder(coeffs_); }

void MetricsRecorder::record_step(const World& world) {
    const auto& spec = world.network();
    const double dt = static_cast<double>(world.dt_ms()) / 1000.0;

    int queue = 0;
    double normalised_speed = 0.0;
    std::size_t n = 0;
    for (int l : spec.incoming_lanes()) {
        queue += world.queue_count(l);
        const double v_max = spec.lane(l).speed_limit;
        for (const auto& v : world.lane_vehicles(l)) {
            normalised_speed += std::clamp(v.speed, 0.0, v_max) / v_max;
            ++n;
        }
    }
    last_queue_ = queue;
    last_delay_ = n == 0 ? 0.0 : std::clamp(1.0 - normalised_speed / static_cast<double>(n), 0.0, 1.0);
    last_waiting_ = static_cast<double>(world.windowed_waiting_ms()) / 1000.0;

    double co2 = 0.0;
    world.for_each_vehicle([&](const VehicleState& v) { co2 += co2_rate(v.speed, v.accel, coeffs_) * dt; });
    co2_mg_ += co2;

    for (const auto& c : world.last_completions()) {
        travel_sum_ += static_cast<double>(c.arrive_ms - c.depart_ms) / 1000.0;
        ++completed_;
    }

    queue_sum_ += last_queue_;
    delay_sum_ += last_delay_;
    waiting_sum_ += last_waiting_;
    recorded_ms_ += world.dt_ms();
    ++samples_;
}

MetricsReport MetricsRecorder::finalize(const World& world, std::int64_t duration_ms) const {
    if (recorded_ms_ < duration_ms || duration_ms <= 0) {
        throw Error(ErrorCode::episode_not_complete,
                    "recorded " + std::to_string(recorded_ms_) + " ms of " + std::to_string(duration_ms));
    }
    const double duration = static_cast<double>(duration_ms) / 1000.0;
    const double samples = static_cast<double>(std::max<std::size_t>(samples_, 1));
    MetricsReport r;
    r.completed = completed_;
    r.spawned = world.spawned_total();
    r.unfinished = r.spawned - r.completed;
    r.avg_travel_time = completed_ == 0 ? 0.0 : travel_sum_ / static_cast<double>(completed_);
    r.throughput_per_hour = static_cast<double>(completed_) * 3600.0 / duration;
    r.mean_queue = queue_sum_ / samples;
    r.mean_delay = delay_sum_ / samples;
    r.mean_accumulated_waiting = waiting_sum_ / samples;
    r.co2_rate = co2_mg_ / 1000.0 / duration;
    r.duration = duration;
    return r;
}

}  // namespace signal_dojo
