#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "signal_dojo/network.hpp"

namespace signal_dojo {

struct DynamicsParams {
    double accel_max = 2.6;       // m/s^2
    double decel_max = 4.5;       // m/s^2
    double vehicle_length = 5.0;  // m
    double vehicle_width = 2.0;   // m, used by the rasterizer only
    double min_gap = 2.5;         // m
    double tau = 1.0;             // reaction time, s
    double sigma = 0.0;           // driver imperfection in [0, 1]
    double halt_threshold = 0.1;  // m/s

    double pitch() const noexcept { return vehicle_length + min_gap; }
    void validate() const;

    friend bool operator==(const DynamicsParams&, const DynamicsParams&) = default;
};

struct FlowSpec {
    std::string movement;
    double rate = 0.0;  // vehicles/hour

    friend bool operator==(const FlowSpec&, const FlowSpec&) = default;
};

enum class Aspect { red, yellow, green };

enum class Stage { approaching, crossing, departing, done };

const char* stage_name(Stage stage) noexcept;

/// Per-vehicle ring of halting flags over the trailing accumulation window.
class WaitingWindow {
public:
    WaitingWindow() = default;
    explicit WaitingWindow(std::size_t steps) : ring_(steps, 0) {}

    void push(bool halted);
    std::int64_t halted_steps() const noexcept { return halted_; }
    std::size_t capacity() const noexcept { return ring_.size(); }

private:
    std::vector<std::uint8_t> ring_;
    std::size_t head_ = 0;
    std::int64_t halted_ = 0;
};

struct VehicleState {
    std::uint64_t id = 0;
    int movement = 0;
    Stage stage = Stage::approaching;
    double position = 0.0;  // front bumper, m from the start of the current segment
    double speed = 0.0;
    double accel = 0.0;     // over the last step
    std::int64_t depart_ms = 0;
    std::optional<std::int64_t> arrive_ms;
    std::int64_t waiting_ms = 0;  // lifetime halting time on the incoming lane
    WaitingWindow window;
};

/// Krauss-style safe-speed update. `u` is the imperfection draw in [0, 1] and is
/// only used when sigma > 0.
double car_following_update(double speed, double speed_limit, double gap, double leader_speed,
                            const DynamicsParams& params, double dt, double u = 0.0);

struct Completion {
    std::uint64_t id = 0;
    int movement = 0;
    std::int64_t depart_ms = 0;
    std::int64_t arrive_ms = 0;
};

/// Mutable traffic state for one intersection. Single-threaded; movable between threads.
class World {
public:
    World(std::shared_ptr<const NetworkSpec> network, DynamicsParams params,
          std::vector<FlowSpec> flows, std::int64_t dt_ms, std::int64_t window_ms);

    /// Clears all traffic and counters and reseeds the insertion generator.
    void reset(std::uint64_t seed);

    /// Draws arrivals for every flow and inserts queued vehicles where the lane entrance
    /// is free. Returns the ids inserted this step. Throws Error(rate_too_high).
    std::vector<std::uint64_t> spawn_step();

    /// Moves every vehicle by one dt under the given per-movement aspects and advances
    /// the clock.
    void advance(std::span<const Aspect> movement_aspects);

    std::int64_t now_ms() const noexcept { return now_ms_; }
    std::int64_t dt_ms() const noexcept { return dt_ms_; }
    const NetworkSpec& network() const noexcept { return *network_; }
    const std::shared_ptr<const NetworkSpec>& network_ptr() const noexcept { return network_; }
    const DynamicsParams& params() const noexcept { return params_; }
    const std::vector<FlowSpec>& flows() const noexcept { return flows_; }

    /// Vehicles on a lane, front (most downstream) first. Throws Error(unknown_lane).
    const std::deque<VehicleState>& lane_vehicles(int lane) const;
    /// Vehicles inside the junction on a movement's link, front first.
    const std::deque<VehicleState>& link_vehicles(int movement) const;

    int queue_count(int lane) const;
    int queue_count(std::string_view lane_id) const;
    double lane_density(int lane) const;
    double lane_density(std::string_view lane_id) const;

    /// Sum over incoming-lane vehicles of their windowed halting time, ms.
    std::int64_t windowed_waiting_ms() const;

    std::uint64_t spawned_total() const noexcept { return spawned_; }
    std::uint64_t completed_total() const noexcept { return completed_; }
    std::uint64_t pending_total() const;
    std::size_t in_network() const;
    const std::vector<Completion>& last_completions() const noexcept { return completions_; }

    /// Inserts a vehicle directly (tests and synthetic worlds). Keeps lane order.
    void place_vehicle(int movement, Stage stage, double position, double speed);

    /// Visits every vehicle in the network in processing order.
    void for_each_vehicle(const std::function<void(const VehicleState&)>& fn) const;

    /// FNV-1a digest of the full traffic state; equal digests mean bit-equal states.
    std::uint64_t digest() const;

private:
    using Queue = std::deque<VehicleState>;

    double limit_speed(const VehicleState& ego, double speed_limit, double gap, double leader_speed);
    void insert_sorted(Queue& queue, VehicleState vehicle);
    bool conflicting_vehicle_inside(int movement) const;

    std::shared_ptr<const NetworkSpec> network_;
    DynamicsParams params_;
    std::vector<FlowSpec> flows_;
    std::vector<int> flow_movement_;
    std::int64_t dt_ms_;
    std::size_t window_steps_;
    std::int64_t now_ms_ = 0;
    std::mt19937_64 rng_;
    std::vector<Queue> lanes_;
    std::vector<Queue> links_;
    std::vector<std::vector<double>> planned_lanes_;
    std::vector<std::vector<double>> planned_links_;
    std::vector<std::uint64_t> pending_;
    std::vector<Completion> completions_;
    std::uint64_t next_id_ = 0;
    std::uint64_t spawned_ = 0;
    std::uint64_t completed_ = 0;
};

double uniform01(std::mt19937_64& rng);

}  // namespace signal_dojo
