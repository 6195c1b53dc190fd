#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "signal_dojo/dynamics.hpp"
#include "signal_dojo/metrics.hpp"
#include "signal_dojo/network.hpp"
#include "signal_dojo/observe.hpp"
#include "signal_dojo/signal.hpp"

namespace signal_dojo {

struct ScenarioConfig {
    std::int64_t duration_ms = 3'600'000;
    std::int64_t dt_ms = 1'000;
    SignalTiming timing;
    std::vector<FlowSpec> flows;
    std::uint64_t seed = 0;
    ObsKind obs_kind = ObsKind::feature;
    double gamma = 0.99;
    DynamicsParams dynamics;
    NoiseParams noise;
    int raster_resolution = 64;
    double raster_extent = 0.0;  // 0 selects default_extent()
    std::int64_t waiting_window_ms = 1'000'000;
    EmissionCoeffs emission;

    /// Throws Error(config_error).
    void validate() const;
};

struct Observation {
    ObsKind kind = ObsKind::feature;
    FeatureObs features;             // feature kinds
    std::vector<RasterObs> rasters;  // one for bev, four for multiview

    std::vector<float> flatten() const;
};

struct ObservationSpec {
    ObsKind kind = ObsKind::feature;
    std::vector<std::size_t> shape;
    double low = 0.0;
    double high = 1.0;

    std::size_t size() const;
};

struct ActionSpec {
    int n = 0;  // discrete phase indices 0..n-1
};

struct StepInfo {
    double sim_time = 0.0;
    int current_phase = 0;
    double total_waiting = 0.0;  // windowed, s
    double step_queue = 0.0;
    double step_delay = 0.0;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
    StepInfo info;
};

/// Signal state as seen by the physics during one sub-step.
struct SignalSample {
    std::int64_t t_ms = 0;
    SignalState state;
};

class Environment;

/// Lifecycle hooks. Within a step: before_step of every manager in registration order,
/// then `step` once per physics sub-step, then after_step in registration order.
class Manager {
public:
    virtual ~Manager() = default;
    virtual std::string_view name() const = 0;
    virtual void before_reset(Environment&) {}
    virtual void reset(Environment&) {}
    virtual void before_step(Environment&, int /*action*/) {}
    virtual void step(Environment&) {}
    virtual void after_step(Environment&) {}
};

class Environment {
public:
    /// Registers the map, flow, signal and metrics managers and resets.
    Environment(std::shared_ptr<const NetworkSpec> network, ScenarioConfig config);
    ~Environment();
    Environment(Environment&&) noexcept;
    Environment& operator=(Environment&&) noexcept;

    /// Reseeds from `seed`, or from the configured seed.
    Observation reset(std::optional<std::uint64_t> seed = std::nullopt);

    /// Throws Error(invalid_action | not_reset).
    StepResult step(int action);

    ObservationSpec observation_spec() const;
    ActionSpec action_spec() const;

    void register_manager(std::unique_ptr<Manager> manager);

    const World& world() const noexcept { return world_; }
    World& world() noexcept { return world_; }
    const SignalState& signal() const noexcept { return signal_; }
    const ScenarioConfig& config() const noexcept { return config_; }
    const NetworkSpec& network() const noexcept { return *network_; }
    const std::shared_ptr<const NetworkSpec>& network_ptr() const noexcept { return network_; }
    const MetricsRecorder& recorder() const noexcept { return recorder_; }
    MetricsRecorder& recorder() noexcept { return recorder_; }

    std::int64_t sim_time_ms() const noexcept { return world_.now_ms(); }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t steps_taken() const noexcept { return steps_; }
    bool truncated() const noexcept { return sim_time_ms() >= config_.duration_ms; }

    std::int64_t waiting_ms() const { return world_.windowed_waiting_ms(); }
    std::int64_t initial_waiting_ms() const noexcept { return initial_waiting_ms_; }

    Observation observe();
    /// Throws Error(episode_not_complete) before truncation.
    MetricsReport metrics() const;

    /// Per sub-step vehicle records: t,id,segment,position,speed,waiting_accum.
    void set_trajectory_log(std::ostream* out) noexcept { trajectory_ = out; }
    void set_signal_trace(bool enabled) noexcept { trace_enabled_ = enabled; }
    const std::vector<SignalSample>& signal_trace() const noexcept { return trace_; }

private:
    friend class SignalManager;
    friend class MetricsManager;

    void set_signal(const SignalState& state) noexcept { signal_ = state; }
    void write_trajectory();

    std::shared_ptr<const NetworkSpec> network_;
    ScenarioConfig config_;
    World world_;
    SignalState signal_;
    MetricsRecorder recorder_;
    std::mt19937_64 noise_rng_;
    std::vector<std::unique_ptr<Manager>> managers_;
    std::uint64_t seed_ = 0;
    std::size_t steps_ = 0;
    std::int64_t initial_waiting_ms_ = 0;
    std::int64_t last_waiting_ms_ = 0;
    double last_reward_ = 0.0;
    std::ostream* trajectory_ = nullptr;
    bool trace_enabled_ = false;
    std::vector<SignalSample> trace_;
};

/// Diff-waiting reward: positive when the summed waiting time fell.
double reward_diff_waiting(double w_prev, double w_now);

class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string_view name() const = 0;
    virtual void reset(const Environment&) {}
    virtual int act(const Environment& env, const Observation& observation) = 0;
};

class FixedTimeController final : public Controller {
public:
    explicit FixedTimeController(FixedPlan plan) : plan_(std::move(plan)) {}
    std::string_view name() const override { return "fixed"; }
    int act(const Environment& env, const Observation&) override;

private:
    FixedPlan plan_;
};

class SotlController final : public Controller {
public:
    explicit SotlController(SotlParams params) : params_(params) {}
    std::string_view name() const override { return "sotl"; }
    void reset(const Environment&) override { kappa_ = 0.0; }
    int act(const Environment& env, const Observation&) override;
    double kappa() const noexcept { return kappa_; }

private:
    SotlParams params_;
    double kappa_ = 0.0;
};

class MaxPressureController final : public Controller {
public:
    std::string_view name() const override { return "maxpressure"; }
    int act(const Environment& env, const Observation&) override;
};

/// Uniform over phases; reseeded from the environment seed on reset.
class RandomController final : public Controller {
public:
    std::string_view name() const override { return "random"; }
    void reset(const Environment& env) override;
    int act(const Environment& env, const Observation&) override;

private:
    std::mt19937_64 rng_;
};

struct ControllerConfig {
    std::string kind = "fixed";
    FixedPlan plan;  // empty selects default_fixed_plan()
    SotlParams sotl;

    friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

/// Builds fixed | sotl | maxpressure | random. Throws Error(invalid_argument) otherwise.
std::unique_ptr<Controller> make_controller(const ControllerConfig& config, const NetworkSpec& network);

struct EpisodeResult {
    MetricsReport report;
    double discounted_return = 0.0;
    double reward_sum = 0.0;
    double initial_waiting = 0.0;
    double final_waiting = 0.0;
    std::size_t steps = 0;
    std::vector<double> rewards;
};

/// Resets, then steps to truncation with actions from `controller`.
EpisodeResult run_episode(Environment& env, Controller& controller,
                          std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace signal_dojo
