#include "signal_dojo/signal_dojo.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "signal_dojo/env.hpp"
#include "signal_dojo/error.hpp"
#include "signal_dojo/learner.hpp"
#include "signal_dojo/report.hpp"
#include "signal_dojo/scenario.hpp"

using namespace signal_dojo;

struct sd_env {
    Scenario scenario;
    std::unique_ptr<Environment> env;
    Observation last;
    bool closed = false;
};

struct sd_controller {
    std::unique_ptr<Controller> impl;
};

struct sd_qtable {
    std::shared_ptr<const QTable> table;
    int bins = 4;
};

namespace {

thread_local std::string last_error;

sd_status fail(sd_status status, const std::string& message) {
    last_error = message;
    return status;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
sd_status guarded(F&& body) {
    try {
        last_error.clear();
        return body();
    } catch (const Error& e) {
        return fail(static_cast<sd_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(SD_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(SD_INTERNAL, e.what());
    } catch (...) {
        return fail(SD_INTERNAL, "unknown failure");
    }
}

sd_status check_env(const sd_env* env) {
    if (env == nullptr) return fail(SD_NULL_ARGUMENT, "null environment handle");
    if (env->closed) return fail(SD_CLOSED_HANDLE, "environment handle is closed");
    return SD_OK;
}

sd_status to_c_string(const std::string& text, char** out) {
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (buf == nullptr) return fail(SD_INTERNAL, "out of memory");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
    return SD_OK;
}

sd_metrics to_c(const MetricsReport& r) {
    return {r.avg_travel_time, r.throughput_per_hour, r.mean_queue, r.mean_delay, r.mean_accumulated_waiting,
            r.co2_rate,        r.completed,           r.unfinished, r.spawned,    r.duration};
}

MetricsReport from_c(const sd_metrics& m) {
    MetricsReport r;
    r.avg_travel_time = m.avg_travel_time;
    r.throughput_per_hour = m.throughput_per_hour;
    r.mean_queue = m.mean_queue;
    r.mean_delay = m.mean_delay;
    r.mean_accumulated_waiting = m.mean_accumulated_waiting;
    r.co2_rate = m.co2_rate;
    r.completed = m.completed;
    r.unfinished = m.unfinished;
    r.spawned = m.spawned;
    r.duration = m.duration;
    return r;
}

ObsKind parse_kind(const char* token) {
    const auto kind = parse_obs_kind(token);
    if (!kind) throw Error(ErrorCode::invalid_argument, std::string("unknown observation kind '") + token + "'");
    return *kind;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t env_digest(const Environment& env) {
    const auto& s = env.signal();
    std::uint64_t h = mix(14695981039346656037ull, env.world().digest());
    h = mix(h, static_cast<std::uint64_t>(s.current_phase));
    h = mix(h, static_cast<std::uint64_t>(s.phase_elapsed_ms));
    h = mix(h, s.in_yellow ? 1u : 0u);
    h = mix(h, static_cast<std::uint64_t>(s.yellow_remaining_ms));
    h = mix(h, static_cast<std::uint64_t>(s.pending_phase.value_or(-1)));
    return h;
}

}  // namespace

extern "C" {

const char* sd_version(void) { return "0.1.0"; }

const char* sd_status_name(sd_status status) {
    switch (status) {
        case SD_OK: return "Ok";
        case SD_CLOSED_HANDLE: return "ClosedHandle";
        case SD_NULL_ARGUMENT: return "NullArgument";
        case SD_BUFFER_TOO_SMALL: return "BufferTooSmall";
        case SD_INTERNAL: return "Internal";
        default:
            if (status >= SD_PARSE_ERROR && status <= SD_INVALID_ARGUMENT) {
                return error_code_name(static_cast<ErrorCode>(status));
            }
            return "Unknown";
    }
}

const char* sd_last_error(void) { return last_error.c_str(); }

void sd_string_free(char* text) { std::free(text); }

void sd_env_options_init(sd_env_options* options) {
    if (options == nullptr) return;
    options->obs_kind = nullptr;
    options->has_seed = 0;
    options->seed = 0;
    options->raster_resolution = 0;
}

sd_status sd_env_create(const char* scenario, const sd_env_options* options, sd_env** out) {
    if (scenario == nullptr || out == nullptr) return fail(SD_NULL_ARGUMENT, "null scenario or output pointer");
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<sd_env>();
        handle->scenario = resolve_scenario(scenario);
        auto& config = handle->scenario.config;
        if (options != nullptr) {
            if (options->obs_kind != nullptr) config.obs_kind = parse_kind(options->obs_kind);
            if (options->has_seed) config.seed = options->seed;
            if (options->raster_resolution != 0) config.raster_resolution = options->raster_resolution;
        }
        handle->env = std::make_unique<Environment>(handle->scenario.network, config);
        handle->last = handle->env->observe();
        *out = handle.release();
        return SD_OK;
    });
}

sd_status sd_env_close(sd_env* env) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    env->env.reset();
    env->last = {};
    env->closed = true;
    return SD_OK;
}

void sd_env_destroy(sd_env* env) { delete env; }

sd_status sd_env_reset(sd_env* env, const uint64_t* seed) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    return guarded([&] {
        env->last = seed ? env->env->reset(*seed) : env->env->reset();
        return SD_OK;
    });
}

sd_status sd_env_step(sd_env* env, int action, sd_step_info* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    return guarded([&] {
        StepResult r = env->env->step(action);
        if (out != nullptr) {
            *out = {r.reward,          r.terminated ? 1 : 0, r.truncated ? 1 : 0,  r.info.sim_time,
                    r.info.current_phase, r.info.total_waiting, r.info.step_queue, r.info.step_delay};
        }
        env->last = std::move(r.observation);
        return SD_OK;
    });
}

sd_status sd_env_num_actions(const sd_env* env, int* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = env->env->action_spec().n;
    return SD_OK;
}

sd_status sd_env_obs_kind(const sd_env* env, const char** out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = obs_kind_name(env->env->config().obs_kind);
    return SD_OK;
}

sd_status sd_env_obs_shape(const sd_env* env, size_t* dims, size_t capacity, size_t* ndim) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (ndim == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    const auto spec = env->env->observation_spec();
    *ndim = spec.shape.size();
    if (dims == nullptr && capacity > 0) return fail(SD_NULL_ARGUMENT, "null dimension buffer");
    for (std::size_t i = 0; i < spec.shape.size() && i < capacity; ++i) dims[i] = spec.shape[i];
    if (capacity < spec.shape.size()) return fail(SD_BUFFER_TOO_SMALL, "shape buffer too small");
    return SD_OK;
}

sd_status sd_env_obs_size(const sd_env* env, size_t* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = env->env->observation_spec().size();
    return SD_OK;
}

sd_status sd_env_observation(const sd_env* env, float* buffer, size_t capacity) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (buffer == nullptr) return fail(SD_NULL_ARGUMENT, "null observation buffer");
    return guarded([&] {
        const auto flat = env->last.flatten();
        if (capacity < flat.size()) {
            return fail(SD_BUFFER_TOO_SMALL,
                        "observation needs " + std::to_string(flat.size()) + " floats, got " + std::to_string(capacity));
        }
        std::memcpy(buffer, flat.data(), flat.size() * sizeof(float));
        return SD_OK;
    });
}

sd_status sd_env_sim_time(const sd_env* env, double* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = static_cast<double>(env->env->sim_time_ms()) / 1000.0;
    return SD_OK;
}

sd_status sd_env_truncated(const sd_env* env, int* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = env->env->truncated() ? 1 : 0;
    return SD_OK;
}

sd_status sd_env_digest(const sd_env* env, uint64_t* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = env_digest(*env->env);
    return SD_OK;
}

sd_status sd_env_scenario_name(const sd_env* env, const char** out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = env->scenario.name.c_str();
    return SD_OK;
}

sd_status sd_env_default_controller(const sd_env* env, const char** out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    *out = env->scenario.controller.kind.c_str();
    return SD_OK;
}

sd_status sd_env_metrics(const sd_env* env, sd_metrics* out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (out == nullptr) return fail(SD_NULL_ARGUMENT, "null output pointer");
    return guarded([&] {
        *out = to_c(env->env->metrics());
        return SD_OK;
    });
}

sd_status sd_env_write_frames(const sd_env* env, const char* kind, int resolution, const char* path_stem) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (kind == nullptr || path_stem == nullptr) return fail(SD_NULL_ARGUMENT, "null kind or path");
    return guarded([&] {
        const auto& e = *env->env;
        const double extent =
            e.config().raster_extent > 0.0 ? e.config().raster_extent : default_extent(e.network());
        const std::string stem = path_stem;
        const std::string k = kind;
        if (k == "bev") {
            write_ppm(bev_raster(e.world(), e.signal(), resolution, extent), stem + ".ppm");
        } else if (k == "multiview") {
            const auto views = multi_view_raster(e.world(), e.signal(), resolution, extent);
            for (std::size_t i = 0; i < views.size(); ++i) {
                write_ppm(views[i], stem + "_v" + std::to_string(i) + ".ppm");
            }
        } else {
            throw Error(ErrorCode::unsupported_obs_kind, "frames are rendered for bev or multiview, not '" + k + "'");
        }
        return SD_OK;
    });
}

sd_status sd_controller_create(const sd_env* env, const char* kind, sd_controller** out) {
    if (const auto s = check_env(env); s != SD_OK) return s;
    if (kind == nullptr || out == nullptr) return fail(SD_NULL_ARGUMENT, "null kind or output pointer");
    *out = nullptr;
    return guarded([&] {
        ControllerConfig config = env->scenario.controller;
        config.kind = kind;
        auto handle = std::make_unique<sd_controller>();
        handle->impl = make_controller(config, env->env->network());
        *out = handle.release();
        return SD_OK;
    });
}

sd_status sd_controller_create_greedy(const sd_qtable* table, sd_controller** out) {
    if (table == nullptr || out == nullptr) return fail(SD_NULL_ARGUMENT, "null table or output pointer");
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<sd_controller>();
        handle->impl = std::make_unique<GreedyQController>(table->table, table->bins);
        *out = handle.release();
        return SD_OK;
    });
}

void sd_controller_destroy(sd_controller* controller) { delete controller; }

sd_status sd_controller_reset(sd_controller* controller, const sd_env* env) {
    if (controller == nullptr) return fail(SD_NULL_ARGUMENT, "null controller handle");
    if (const auto s = check_env(env); s != SD_OK) return s;
    return guarded([&] {
        controller->impl->reset(*env->env);
        return SD_OK;
    });
}

sd_status sd_controller_act(sd_controller* controller, const sd_env* env, int* action) {
    if (controller == nullptr || action == nullptr) return fail(SD_NULL_ARGUMENT, "null controller or output");
    if (const auto s = check_env(env); s != SD_OK) return s;
    return guarded([&] {
        *action = controller->impl->act(*env->env, env->last);
        return SD_OK;
    });
}

sd_status sd_run_episode(sd_env* env, sd_controller* controller, const uint64_t* seed, const char* trajectory_path,
                         sd_episode* out) {
    if (controller == nullptr) return fail(SD_NULL_ARGUMENT, "null controller handle");
    if (const auto s = check_env(env); s != SD_OK) return s;
    return guarded([&] {
        std::ofstream log;
        if (trajectory_path != nullptr) {
            log.open(trajectory_path, std::ios::binary);
            if (!log) throw Error(ErrorCode::io_error, std::string("cannot open '") + trajectory_path + "'");
            log << "t,id,segment,position,speed,waiting_accum\n";
            env->env->set_trajectory_log(&log);
        }
        struct Detach {
            Environment& e;
            ~Detach() { e.set_trajectory_log(nullptr); }
        } detach{*env->env};
        std::optional<std::uint64_t> s;
        if (seed != nullptr) s = *seed;
        const EpisodeResult r = run_episode(*env->env, *controller->impl, s);
        env->last = env->env->observe();
        if (log.is_open()) {
            log.flush();
            if (!log) throw Error(ErrorCode::io_error, std::string("write failed on '") + trajectory_path + "'");
        }
        if (out != nullptr) {
            *out = {to_c(r.report),  r.discounted_return,        r.reward_sum, r.initial_waiting,
                    r.final_waiting, static_cast<uint64_t>(r.steps), env_digest(*env->env)};
        }
        return SD_OK;
    });
}

void sd_train_options_init(sd_train_options* options) {
    if (options == nullptr) return;
    options->episodes = 100;
    options->has_seed = 0;
    options->seed = 0;
    options->obs_kind = nullptr;
}

sd_status sd_train(const char* scenario, const sd_train_options* options, sd_qtable** table, double* curve) {
    if (scenario == nullptr || table == nullptr) return fail(SD_NULL_ARGUMENT, "null scenario or output pointer");
    *table = nullptr;
    return guarded([&] {
        sd_train_options opts;
        sd_train_options_init(&opts);
        if (options != nullptr) opts = *options;
        if (opts.episodes < 0) throw Error(ErrorCode::invalid_argument, "episodes must be nonnegative");
        Scenario s = resolve_scenario(scenario);
        if (opts.obs_kind != nullptr) s.config.obs_kind = parse_kind(opts.obs_kind);
        if (opts.has_seed) s.config.seed = opts.seed;
        LearnerParams params;
        params.gamma = s.config.gamma;
        TrainResult result = train(s.network, s.config, opts.episodes, params);
        if (curve != nullptr) std::copy(result.curve.begin(), result.curve.end(), curve);
        auto handle = std::make_unique<sd_qtable>();
        handle->table = std::make_shared<const QTable>(std::move(result.table));
        handle->bins = params.bins;
        *table = handle.release();
        return SD_OK;
    });
}

sd_status sd_qtable_save(const sd_qtable* table, const char* path) {
    if (table == nullptr || path == nullptr) return fail(SD_NULL_ARGUMENT, "null table or path");
    return guarded([&] {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::io_error, std::string("cannot open '") + path + "'");
        table->table->save(out);
        out.flush();
        if (!out) throw Error(ErrorCode::io_error, std::string("write failed on '") + path + "'");
        return SD_OK;
    });
}

sd_status sd_qtable_load(const char* path, sd_qtable** out) {
    if (path == nullptr || out == nullptr) return fail(SD_NULL_ARGUMENT, "null path or output pointer");
    *out = nullptr;
    return guarded([&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::io_error, std::string("cannot open '") + path + "'");
        auto handle = std::make_unique<sd_qtable>();
        handle->table = std::make_shared<const QTable>(QTable::load(in));
        *out = handle.release();
        return SD_OK;
    });
}

sd_status sd_qtable_size(const sd_qtable* table, size_t* out) {
    if (table == nullptr || out == nullptr) return fail(SD_NULL_ARGUMENT, "null table or output pointer");
    *out = table->table->size();
    return SD_OK;
}

void sd_qtable_destroy(sd_qtable* table) { delete table; }

sd_status sd_aggregate_metrics(const sd_metrics* reports, size_t count, sd_aggregate* out) {
    if ((reports == nullptr && count > 0) || out == nullptr) return fail(SD_NULL_ARGUMENT, "null input or output");
    return guarded([&] {
        std::vector<MetricsReport> rs;
        rs.reserve(count);
        for (std::size_t i = 0; i < count; ++i) rs.push_back(from_c(reports[i]));
        const AggregateReport a = aggregate(rs);
        auto c = [](const MetricStats& s) { return sd_stat{s.mean, s.std}; };
        *out = {c(a.avg_travel_time), c(a.throughput_per_hour),      c(a.mean_queue), c(a.mean_delay),
                c(a.mean_accumulated_waiting), c(a.co2_rate), static_cast<uint64_t>(a.runs)};
        return SD_OK;
    });
}

sd_status sd_format_csv_header(char** out) {
    return guarded([&] { return to_c_string(report_csv_header(), out); });
}

sd_status sd_format_csv_row(const char* scenario, const char* controller, uint64_t seed, const sd_metrics* metrics,
                            char** out) {
    if (scenario == nullptr || controller == nullptr || metrics == nullptr) {
        return fail(SD_NULL_ARGUMENT, "null argument");
    }
    return guarded([&] { return to_c_string(report_csv_row(scenario, controller, seed, from_c(*metrics)), out); });
}

sd_status sd_format_aggregate_csv(const char* scenario, const char* controller, const sd_aggregate* agg,
                                  char** out) {
    if (scenario == nullptr || controller == nullptr || agg == nullptr) return fail(SD_NULL_ARGUMENT, "null argument");
    return guarded([&] {
        auto c = [](const sd_stat& s) { return MetricStats{s.mean, s.std}; };
        AggregateReport a;
        a.avg_travel_time = c(agg->avg_travel_time);
        a.throughput_per_hour = c(agg->throughput_per_hour);
        a.mean_queue = c(agg->mean_queue);
        a.mean_delay = c(agg->mean_delay);
        a.mean_accumulated_waiting = c(agg->mean_accumulated_waiting);
        a.co2_rate = c(agg->co2_rate);
        a.runs = agg->runs;
        return to_c_string(aggregate_csv_rows(scenario, controller, a), out);
    });
}

sd_status sd_format_json(const sd_metrics* metrics, char** out) {
    if (metrics == nullptr) return fail(SD_NULL_ARGUMENT, "null metrics");
    return guarded([&] { return to_c_string(report_json(from_c(*metrics)), out); });
}

sd_status sd_format_number(double value, char** out) {
    return guarded([&] { return to_c_string(format_number(value), out); });
}

}  // extern "C"
