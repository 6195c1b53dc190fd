#ifndef SIGNAL_DOJO_H
#define SIGNAL_DOJO_H

#include <stddef.h>
#include <stdint.h>

#if defined(SIGNAL_DOJO_BUILDING)
#define SD_API __attribute__((visibility("default")))
#else
#define SD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes 1..17 match the core error codes one to one. */
typedef enum sd_status {
    SD_OK = 0,
    SD_PARSE_ERROR = 1,
    SD_DANGLING_REFERENCE = 2,
    SD_CONFLICTING_PHASE = 3,
    SD_EMPTY_PHASE = 4,
    SD_UNKNOWN_SCENARIO = 5,
    SD_CONFIG_ERROR = 6,
    SD_RATE_TOO_HIGH = 7,
    SD_UNKNOWN_LANE = 8,
    SD_UNKNOWN_MOVEMENT = 9,
    SD_INVALID_PHASE = 10,
    SD_INVALID_ACTION = 11,
    SD_NOT_RESET = 12,
    SD_BAD_RESOLUTION = 13,
    SD_EPISODE_NOT_COMPLETE = 14,
    SD_UNSUPPORTED_OBS_KIND = 15,
    SD_IO_ERROR = 16,
    SD_INVALID_ARGUMENT = 17,
    SD_CLOSED_HANDLE = 18,
    SD_NULL_ARGUMENT = 19,
    SD_BUFFER_TOO_SMALL = 20,
    SD_INTERNAL = 21
} sd_status;

typedef struct sd_env sd_env;
typedef struct sd_controller sd_controller;
typedef struct sd_qtable sd_qtable;

SD_API const char* sd_version(void);
SD_API const char* sd_status_name(sd_status status);
/* Message of the last failing call on this thread; "" if none. */
SD_API const char* sd_last_error(void);
/* Frees strings returned through char** out-parameters. */
SD_API void sd_string_free(char* text);

/* ---- environment ---- */

typedef struct sd_env_options {
    const char* obs_kind;  /* "feature", "noisy_feature", "bev", "multiview"; NULL keeps the scenario's */
    int has_seed;
    uint64_t seed;
    int raster_resolution; /* 0 keeps the scenario's */
} sd_env_options;

SD_API void sd_env_options_init(sd_env_options* options);

/* `scenario` is a built-in name or a path to a scenario document. options may be NULL. */
SD_API sd_status sd_env_create(const char* scenario, const sd_env_options* options, sd_env** out);
/* Further calls on a closed handle return SD_CLOSED_HANDLE. */
SD_API sd_status sd_env_close(sd_env* env);
SD_API void sd_env_destroy(sd_env* env);

/* seed may be NULL to reuse the configured seed. */
SD_API sd_status sd_env_reset(sd_env* env, const uint64_t* seed);

typedef struct sd_step_info {
    double reward;
    int terminated;
    int truncated;
    double sim_time;
    int current_phase;
    double total_waiting;
    double step_queue;
    double step_delay;
} sd_step_info;

SD_API sd_status sd_env_step(sd_env* env, int action, sd_step_info* out);

SD_API sd_status sd_env_num_actions(const sd_env* env, int* out);
SD_API sd_status sd_env_obs_kind(const sd_env* env, const char** out);
/* Writes up to `capacity` dimensions; *ndim receives the full rank. */
SD_API sd_status sd_env_obs_shape(const sd_env* env, size_t* dims, size_t capacity, size_t* ndim);
SD_API sd_status sd_env_obs_size(const sd_env* env, size_t* out);
/* Copies the latest observation, flattened in row-major order. */
SD_API sd_status sd_env_observation(const sd_env* env, float* buffer, size_t capacity);
SD_API sd_status sd_env_sim_time(const sd_env* env, double* out);
SD_API sd_status sd_env_truncated(const sd_env* env, int* out);
/* Hash of the full traffic and signal state. */
SD_API sd_status sd_env_digest(const sd_env* env, uint64_t* out);
SD_API sd_status sd_env_scenario_name(const sd_env* env, const char** out);
/* Controller kind named by the scenario document. */
SD_API sd_status sd_env_default_controller(const sd_env* env, const char** out);

typedef struct sd_metrics {
    double avg_travel_time;
    double throughput_per_hour;
    double mean_queue;
    double mean_delay;
    double mean_accumulated_waiting;
    double co2_rate;
    uint64_t completed;
    uint64_t unfinished;
    uint64_t spawned;
    double duration;
} sd_metrics;

/* SD_EPISODE_NOT_COMPLETE before truncation. */
SD_API sd_status sd_env_metrics(const sd_env* env, sd_metrics* out);

/* Writes the current BEV raster (stem.ppm) or the four views (stem_v0.ppm .. stem_v3.ppm). */
SD_API sd_status sd_env_write_frames(const sd_env* env, const char* kind, int resolution, const char* path_stem);

/* ---- controllers ---- */

/* "fixed", "sotl", "maxpressure" or "random". Parameters come from the env's scenario. */
SD_API sd_status sd_controller_create(const sd_env* env, const char* kind, sd_controller** out);
/* Greedy policy over a trained table. The table may be destroyed afterwards. */
SD_API sd_status sd_controller_create_greedy(const sd_qtable* table, sd_controller** out);
SD_API void sd_controller_destroy(sd_controller* controller);
SD_API sd_status sd_controller_reset(sd_controller* controller, const sd_env* env);
SD_API sd_status sd_controller_act(sd_controller* controller, const sd_env* env, int* action);

typedef struct sd_episode {
    sd_metrics metrics;
    double discounted_return;
    double reward_sum;
    double initial_waiting;
    double final_waiting;
    uint64_t steps;
    uint64_t digest;
} sd_episode;

/* Resets (seed may be NULL), runs to truncation. trajectory_path may be NULL. */
SD_API sd_status sd_run_episode(sd_env* env, sd_controller* controller, const uint64_t* seed,
                                const char* trajectory_path, sd_episode* out);

/* ---- learner ---- */

typedef struct sd_train_options {
    int episodes;
    int has_seed;
    uint64_t seed;
    const char* obs_kind; /* NULL keeps the scenario's; must be a feature kind */
} sd_train_options;

SD_API void sd_train_options_init(sd_train_options* options);
/* curve may be NULL; otherwise it receives `episodes` per-episode reward sums. */
SD_API sd_status sd_train(const char* scenario, const sd_train_options* options, sd_qtable** table, double* curve);
SD_API sd_status sd_qtable_save(const sd_qtable* table, const char* path);
SD_API sd_status sd_qtable_load(const char* path, sd_qtable** out);
SD_API sd_status sd_qtable_size(const sd_qtable* table, size_t* out);
SD_API void sd_qtable_destroy(sd_qtable* table);

/* ---- reports ---- */

typedef struct sd_stat {
    double mean;
    double std;
} sd_stat;

typedef struct sd_aggregate {
    sd_stat avg_travel_time;
    sd_stat throughput_per_hour;
    sd_stat mean_queue;
    sd_stat mean_delay;
    sd_stat mean_accumulated_waiting;
    sd_stat co2_rate;
    uint64_t runs;
} sd_aggregate;

SD_API sd_status sd_aggregate_metrics(const sd_metrics* reports, size_t count, sd_aggregate* out);
SD_API sd_status sd_format_csv_header(char** out);
SD_API sd_status sd_format_csv_row(const char* scenario, const char* controller, uint64_t seed,
                                   const sd_metrics* metrics, char** out);
SD_API sd_status sd_format_aggregate_csv(const char* scenario, const char* controller, const sd_aggregate* agg,
                                         char** out);
SD_API sd_status sd_format_json(const sd_metrics* metrics, char** out);
/* Shortest decimal that round-trips. */
SD_API sd_status sd_format_number(double value, char** out);

#ifdef __cplusplus
}
#endif

#endif
