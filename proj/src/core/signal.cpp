#include "signal_dojo/signal.hpp"

#include <algorithm>

#include "signal_dojo/error.hpp"

namespace signal_dojo {

void SignalTiming::validate(std::int64_t dt_ms) const {
    if (yellow_ms <= 0) throw Error(ErrorCode::config_error, "yellow must be positive");
    if (delta_time_ms <= 0 || dt_ms <= 0 || delta_time_ms % dt_ms != 0) {
        throw Error(ErrorCode::config_error, "delta_time must be a positive multiple of dt");
    }
    if (min_green_ms < delta_time_ms) {
        throw Error(ErrorCode::config_error, "min_green must be at least delta_time");
    }
    if (yellow_ms % dt_ms != 0) throw Error(ErrorCode::config_error, "yellow must be a multiple of dt");
}

SignalState request_phase(const SignalState& state, int target, const SignalTiming& timing,
                          std::size_t phase_count) {
    if (target < 0 || static_cast<std::size_t>(target) >= phase_count) {
        throw Error(ErrorCode::invalid_phase, "phase " + std::to_string(target) + " does not exist");
    }
    if (target == state.current_phase || state.in_yellow || state.phase_elapsed_ms < timing.min_green_ms) {
        return state;
    }
    SignalState next = state;
    next.in_yellow = true;
    next.yellow_remaining_ms = timing.yellow_ms;
    next.pending_phase = target;
    return next;
}

SignalState tick_signal(const SignalState& state, std::int64_t dt_ms) {
    SignalState next = state;
    if (next.in_yellow) {
        next.yellow_remaining_ms -= dt_ms;
        if (next.yellow_remaining_ms <= 0) {
            next.current_phase = *next.pending_phase;
            next.phase_elapsed_ms = 0;
            next.in_yellow = false;
            next.yellow_remaining_ms = 0;
            next.pending_phase.reset();
            return next;
        }
    }
    next.phase_elapsed_ms += dt_ms;
    return next;
}

Aspect aspect(const SignalState& state, int movement, const NetworkSpec& spec) {
    if (movement < 0 || static_cast<std::size_t>(movement) >= spec.movements().size()) {
        throw Error(ErrorCode::unknown_movement, "movement index " + std::to_string(movement));
    }
    if (!spec.phase_contains(state.current_phase, movement)) return Aspect::red;
    return state.in_yellow ? Aspect::yellow : Aspect::green;
}

std::vector<Aspect> movement_aspects(const SignalState& state, const NetworkSpec& spec) {
    std::vector<Aspect> out(spec.movements().size(), Aspect::red);
    const Aspect lit = state.in_yellow ? Aspect::yellow : Aspect::green;
    for (int m : spec.phases().at(static_cast<std::size_t>(state.current_phase))) {
        out[static_cast<std::size_t>(m)] = lit;
    }
    return out;
}

Aspect lane_aspect(const SignalState& state, int lane, const NetworkSpec& spec) {
    Aspect best = Aspect::red;
    for (int m : spec.lane(lane).movements) {
        best = std::max(best, aspect(state, m, spec));
    }
    return best;
}

FixedPlan default_fixed_plan(std::size_t phase_count) {
    FixedPlan plan;
    for (std::size_t p = 0; p < phase_count; ++p) plan.push_back({static_cast<int>(p), 30'000});
    return plan;
}

int fixed_time_policy(std::int64_t t_ms, const FixedPlan& plan) {
    if (plan.empty()) throw Error(ErrorCode::invalid_argument, "fixed-time plan is empty");
    std::int64_t cycle = 0;
    for (const auto& slot : plan) cycle += slot.green_ms;
    if (cycle <= 0) throw Error(ErrorCode::invalid_argument, "fixed-time plan has zero length");
    std::int64_t offset = ((t_ms % cycle) + cycle) % cycle;
    for (const auto& slot : plan) {
        if (offset < slot.green_ms) return slot.phase;
        offset -= slot.green_ms;
    }
    return plan.back().phase;
}

std::vector<int> phase_pressures(const World& world) {
    const auto& spec = world.network();
    std::vector<int> pressure(spec.phase_count(), 0);
    for (std::size_t p = 0; p < spec.phase_count(); ++p) {
        for (int m : spec.phases()[p]) {
            const auto& mv = spec.movement(m);
            pressure[p] += world.queue_count(mv.from_lane) - world.queue_count(mv.to_lane);
        }
    }
    return pressure;
}

int max_pressure_policy(const World& world) {
    const auto pressure = phase_pressures(world);
    // max_element returns the first maximum, so ties go to the lowest index.
    return static_cast<int>(std::max_element(pressure.begin(), pressure.end()) - pressure.begin());
}

SotlDecision sotl_policy(const World& world, const SignalState& state, const SotlParams& params,
                         const SignalTiming& timing, double kappa) {
    const auto& spec = world.network();
    const double halt = world.params().halt_threshold;
    int red_halted = 0;
    int approaching_green = 0;
    for (int l : spec.incoming_lanes()) {
        const Aspect a = lane_aspect(state, l, spec);
        const auto& vehicles = world.lane_vehicles(l);
        const double line = spec.lane(l).length;
        if (a == Aspect::red) {
            red_halted += static_cast<int>(std::count_if(vehicles.begin(), vehicles.end(),
                                                         [&](const VehicleState& v) { return v.speed < halt; }));
        } else if (a == Aspect::green) {
            approaching_green += static_cast<int>(std::count_if(
                vehicles.begin(), vehicles.end(),
                [&](const VehicleState& v) { return line - v.position <= params.omega; }));
        }
    }
    SotlDecision d;
    d.kappa = kappa + static_cast<double>(timing.delta_time_ms) / 1000.0 * red_halted;
    const bool small_platoon = approaching_green > 0 && approaching_green <= params.mu;
    d.switch_phase = d.kappa > params.theta && state.phase_elapsed_ms >= timing.min_green_ms && !small_platoon;
    if (d.switch_phase) d.kappa = 0.0;
    return d;
}

}  // namespace signal_dojo
