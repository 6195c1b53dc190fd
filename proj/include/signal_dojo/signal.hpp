#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "signal_dojo/dynamics.hpp"
#include "signal_dojo/network.hpp"

namespace signal_dojo {

struct SignalTiming {
    std::int64_t min_green_ms = 10'000;
    std::int64_t yellow_ms = 2'000;
    std::int64_t delta_time_ms = 5'000;

    void validate(std::int64_t dt_ms) const;

    friend bool operator==(const SignalTiming&, const SignalTiming&) = default;
};

struct SignalState {
    int current_phase = 0;
    std::int64_t phase_elapsed_ms = 0;  // since the current green began
    bool in_yellow = false;
    std::int64_t yellow_remaining_ms = 0;
    std::optional<int> pending_phase;

    friend bool operator==(const SignalState&, const SignalState&) = default;
};

/// Starts a yellow towards `target` when allowed; same-phase requests, requests during
/// yellow and requests before min green are ignored. Throws Error(invalid_phase).
SignalState request_phase(const SignalState& state, int target, const SignalTiming& timing,
                          std::size_t phase_count);

/// Advances the signal clock by one physics step; completes an expired yellow.
SignalState tick_signal(const SignalState& state, std::int64_t dt_ms);

/// Throws Error(unknown_movement).
Aspect aspect(const SignalState& state, int movement, const NetworkSpec& spec);
std::vector<Aspect> movement_aspects(const SignalState& state, const NetworkSpec& spec);
/// Green if any movement leaving the lane is green, else yellow if any is yellow, else red.
Aspect lane_aspect(const SignalState& state, int lane, const NetworkSpec& spec);

struct PlanSlot {
    int phase = 0;
    std::int64_t green_ms = 0;

    friend bool operator==(const PlanSlot&, const PlanSlot&) = default;
};

using FixedPlan = std::vector<PlanSlot>;

/// All phases in index order, 30 s each.
FixedPlan default_fixed_plan(std::size_t phase_count);

int fixed_time_policy(std::int64_t t_ms, const FixedPlan& plan);

/// Pressure of each phase: sum over its movements of in-lane minus out-lane queue.
std::vector<int> phase_pressures(const World& world);
int max_pressure_policy(const World& world);

struct SotlParams {
    double theta = 50.0;  // vehicle-seconds
    int mu = 3;           // vehicles
    double omega = 25.0;  // m

    friend bool operator==(const SotlParams&, const SotlParams&) = default;
};

struct SotlDecision {
    bool switch_phase = false;
    double kappa = 0.0;
};

SotlDecision sotl_policy(const World& world, const SignalState& state, const SotlParams& params,
                         const SignalTiming& timing, double kappa);

}  // namespace signal_dojo
