#include "signal_dojo/env.hpp"

#include <ostream>

#include "signal_dojo/error.hpp"

namespace signal_dojo {

void ScenarioConfig::validate() const {
    if (dt_ms <= 0) throw Error(ErrorCode::config_error, "dt must be positive");
    timing.validate(dt_ms);
    if (duration_ms <= 0 || duration_ms % timing.delta_time_ms != 0) {
        throw Error(ErrorCode::config_error, "duration must be a positive multiple of delta_time");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::config_error, "gamma must lie in [0, 1]");
    if (!(noise.std_factor >= 0.0)) throw Error(ErrorCode::config_error, "noise std must be nonnegative");
    if (raster_resolution < 8 || raster_resolution > 4096) {
        throw Error(ErrorCode::bad_resolution, "resolution " + std::to_string(raster_resolution));
    }
    if (raster_extent < 0.0) throw Error(ErrorCode::config_error, "raster extent must be nonnegative");
    if (waiting_window_ms < dt_ms) throw Error(ErrorCode::config_error, "waiting window shorter than dt");
    dynamics.validate();
}

std::vector<float> Observation::flatten() const {
    std::vector<float> out;
    if (kind == ObsKind::feature || kind == ObsKind::noisy_feature) {
        for (double v : features.flatten()) out.push_back(static_cast<float>(v));
        return out;
    }
    for (const auto& r : rasters) out.insert(out.end(), r.pixels.begin(), r.pixels.end());
    return out;
}

std::size_t ObservationSpec::size() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

double reward_diff_waiting(double w_prev, double w_now) { return w_prev - w_now; }

// Static network; nothing to rebuild between episodes.
class MapManager final : public Manager {
public:
    std::string_view name() const override { return "map"; }
};

class FlowManager final : public Manager {
public:
    std::string_view name() const override { return "flow"; }
    void before_reset(Environment& env) override { env.world().reset(env.seed()); }
    void step(Environment& env) override {
        env.world().spawn_step();
        const auto aspects = movement_aspects(env.signal(), env.network());
        env.world().advance(aspects);
    }
};

class SignalManager final : public Manager {
public:
    std::string_view name() const override { return "signal"; }
    void reset(Environment& env) override { env.set_signal(SignalState{}); }
    void before_step(Environment& env, int action) override {
        env.set_signal(request_phase(env.signal(), action, env.config().timing, env.network().phase_count()));
    }
    void step(Environment& env) override { env.set_signal(tick_signal(env.signal(), env.config().dt_ms)); }
};

class MetricsManager final : public Manager {
public:
    std::string_view name() const override { return "metrics"; }
    void reset(Environment& env) override {
        env.recorder().reset();
        env.initial_waiting_ms_ = env.waiting_ms();
        env.last_waiting_ms_ = env.initial_waiting_ms_;
    }
    void step(Environment& env) override { env.recorder().record_step(env.world()); }
    void after_step(Environment& env) override {
        const std::int64_t now = env.waiting_ms();
        // Integer milliseconds keep the telescoping sum exact.
        env.last_reward_ = reward_diff_waiting(static_cast<double>(env.last_waiting_ms_),
                                               static_cast<double>(now)) / 1000.0;
        env.last_waiting_ms_ = now;
    }
};

Environment::Environment(std::shared_ptr<const NetworkSpec> network, ScenarioConfig config)
    : network_(std::move(network)),
      config_((config.validate(), std::move(config))),
      world_(network_, config_.dynamics, config_.flows, config_.dt_ms, config_.waiting_window_ms),
      recorder_(config_.emission),
      seed_(config_.seed) {
    if (network_->vehicle_pitch() != config_.dynamics.pitch()) {
        throw Error(ErrorCode::config_error, "network capacities were derived with a different vehicle pitch");
    }
    managers_.push_back(std::make_unique<MapManager>());
    managers_.push_back(std::make_unique<FlowManager>());
    managers_.push_back(std::make_unique<SignalManager>());
    managers_.push_back(std::make_unique<MetricsManager>());
    reset();
}

Environment::~Environment() = default;
Environment::Environment(Environment&&) noexcept = default;
Environment& Environment::operator=(Environment&&) noexcept = default;

void Environment::register_manager(std::unique_ptr<Manager> manager) {
    managers_.push_back(std::move(manager));
}

Observation Environment::reset(std::optional<std::uint64_t> seed) {
    seed_ = seed.value_or(config_.seed);
    for (auto& m : managers_) m->before_reset(*this);
    for (auto& m : managers_) m->reset(*this);
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32), 0x401fu};
    noise_rng_.seed(seq);
    steps_ = 0;
    last_reward_ = 0.0;
    trace_.clear();
    return observe();
}

StepResult Environment::step(int action) {
    if (truncated()) throw Error(ErrorCode::not_reset, "episode is truncated; call reset");
    if (action < 0 || static_cast<std::size_t>(action) >= network_->phase_count()) {
        throw Error(ErrorCode::invalid_action, "action " + std::to_string(action) + " is not a phase index");
    }
    for (auto& m : managers_) m->before_step(*this, action);
    const std::int64_t substeps = config_.timing.delta_time_ms / config_.dt_ms;
    for (std::int64_t k = 0; k < substeps; ++k) {
        if (trace_enabled_) trace_.push_back({sim_time_ms(), signal_});
        for (auto& m : managers_) m->step(*this);
        if (trajectory_ != nullptr) write_trajectory();
    }
    for (auto& m : managers_) m->after_step(*this);
    ++steps_;

    StepResult result;
    result.observation = observe();
    result.reward = last_reward_;
    result.terminated = false;
    result.truncated = truncated();
    result.info.sim_time = static_cast<double>(sim_time_ms()) / 1000.0;
    result.info.current_phase = signal_.current_phase;
    result.info.total_waiting = static_cast<double>(last_waiting_ms_) / 1000.0;
    result.info.step_queue = recorder_.last_queue();
    result.info.step_delay = recorder_.last_delay();
    return result;
}

Observation Environment::observe() {
    Observation obs;
    obs.kind = config_.obs_kind;
    const double extent = config_.raster_extent > 0.0 ? config_.raster_extent : default_extent(*network_);
    switch (config_.obs_kind) {
    case ObsKind::feature: obs.features = feature_obs(world_, signal_, config_.timing); break;
    case ObsKind::noisy_feature:
        obs.features = noisy_feature_obs(world_, signal_, config_.timing, config_.noise, noise_rng_);
        break;
    case ObsKind::bev:
        obs.rasters.push_back(bev_raster(world_, signal_, config_.raster_resolution, extent));
        break;
    case ObsKind::multiview:
        obs.rasters = multi_view_raster(world_, signal_, config_.raster_resolution, extent);
        break;
    }
    return obs;
}

ObservationSpec Environment::observation_spec() const {
    ObservationSpec spec;
    spec.kind = config_.obs_kind;
    const auto res = static_cast<std::size_t>(config_.raster_resolution);
    switch (config_.obs_kind) {
    case ObsKind::feature:
    case ObsKind::noisy_feature:
        spec.shape = {network_->phase_count() + 1 + 2 * network_->incoming_lanes().size()};
        break;
    case ObsKind::bev: spec.shape = {res, res, RasterObs::kChannels}; break;
    case ObsKind::multiview: spec.shape = {network_->approach_count(), res, res, RasterObs::kChannels}; break;
    }
    return spec;
}

ActionSpec Environment::action_spec() const { return {static_cast<int>(network_->phase_count())}; }

MetricsReport Environment::metrics() const { return recorder_.finalize(world_, config_.duration_ms); }

void Environment::write_trajectory() {
    const double t = static_cast<double>(sim_time_ms()) / 1000.0;
    auto& out = *trajectory_;
    world_.for_each_vehicle([&](const VehicleState& v) {
        const auto& mv = network_->movement(v.movement);
        const std::string& segment = v.stage == Stage::approaching ? network_->lane(mv.from_lane).id
                                     : v.stage == Stage::departing ? network_->lane(mv.to_lane).id
                                                                   : mv.id;
        out << t << ',' << v.id << ',' << segment << ',' << v.position << ',' << v.speed << ','
            << static_cast<double>(v.waiting_ms) / 1000.0 << '\n';
    });
}

int FixedTimeController::act(const Environment& env, const Observation&) {
    return fixed_time_policy(env.sim_time_ms(), plan_);
}

int SotlController::act(const Environment& env, const Observation&) {
    const auto decision = sotl_policy(env.world(), env.signal(), params_, env.config().timing, kappa_);
    kappa_ = decision.kappa;
    const int current = env.signal().current_phase;
    if (!decision.switch_phase) return current;
    return (current + 1) % static_cast<int>(env.network().phase_count());
}

int MaxPressureController::act(const Environment& env, const Observation&) {
    return max_pressure_policy(env.world());
}

void RandomController::reset(const Environment& env) {
    std::seed_seq seq{static_cast<std::uint32_t>(env.seed()), static_cast<std::uint32_t>(env.seed() >> 32),
                      0x7a11u};
    rng_.seed(seq);
}

int RandomController::act(const Environment& env, const Observation&) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(env.network().phase_count()) - 1);
    return pick(rng_);
}

std::unique_ptr<Controller> make_controller(const ControllerConfig& config, const NetworkSpec& network) {
    if (config.kind == "fixed") {
        FixedPlan plan = config.plan.empty() ? default_fixed_plan(network.phase_count()) : config.plan;
        for (const auto& slot : plan) {
            if (slot.phase < 0 || static_cast<std::size_t>(slot.phase) >= network.phase_count()) {
                throw Error(ErrorCode::invalid_phase, "fixed plan names phase " + std::to_string(slot.phase));
            }
            if (slot.green_ms <= 0) throw Error(ErrorCode::config_error, "fixed plan durations must be positive");
        }
        return std::make_unique<FixedTimeController>(std::move(plan));
    }
    if (config.kind == "sotl") {
        if (!(config.sotl.theta > 0 && config.sotl.mu > 0 && config.sotl.omega > 0)) {
            throw Error(ErrorCode::config_error, "SOTL parameters must be positive");
        }
        for (int l : network.incoming_lanes()) {
            if (config.sotl.omega > network.lane(l).length) {
                throw Error(ErrorCode::config_error, "SOTL omega exceeds the shortest incoming lane");
            }
        }
        return std::make_unique<SotlController>(config.sotl);
    }
    if (config.kind == "maxpressure") return std::make_unique<MaxPressureController>();
    if (config.kind == "random") return std::make_unique<RandomController>();
    throw Error(ErrorCode::invalid_argument, "unknown controller '" + config.kind + "'");
}

EpisodeResult run_episode(Environment& env, Controller& controller, std::optional<std::uint64_t> seed) {
    Observation obs = env.reset(seed);
    controller.reset(env);
    EpisodeResult result;
    result.initial_waiting = static_cast<double>(env.initial_waiting_ms()) / 1000.0;
    double discount = 1.0;
    const double gamma = env.config().gamma;
    while (!env.truncated()) {
        const int action = controller.act(env, obs);
        StepResult step = env.step(action);
        result.rewards.push_back(step.reward);
        result.reward_sum += step.reward;
        result.discounted_return += discount * step.reward;
        discount *= gamma;
        obs = std::move(step.observation);
    }
    result.steps = env.steps_taken();
    result.final_waiting = static_cast<double>(env.waiting_ms()) / 1000.0;
    result.report = env.metrics();
    return result;
}

}  // namespace signal_dojo
