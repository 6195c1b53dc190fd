#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "signal_dojo/signal_dojo.h"

namespace {

struct Env {
    sd_env* p = nullptr;
    explicit Env(const char* scenario, const sd_env_options* opts = nullptr) {
        EXPECT_EQ(sd_env_create(scenario, opts, &p), SD_OK) << sd_last_error();
    }
    ~Env() { sd_env_destroy(p); }
};

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("sd_capi_" + name)).string();
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
    EXPECT_STREQ(sd_version(), "0.1.0");
    EXPECT_STREQ(sd_status_name(SD_OK), "Ok");
    EXPECT_STREQ(sd_status_name(SD_CLOSED_HANDLE), "ClosedHandle");
}

TEST(CApi, FeatureEnvShapes) {
    Env env("single-intersection");
    int n = 0;
    ASSERT_EQ(sd_env_num_actions(env.p, &n), SD_OK);
    EXPECT_EQ(n, 4);
    size_t dims[4];
    size_t ndim = 0;
    ASSERT_EQ(sd_env_obs_shape(env.p, dims, 4, &ndim), SD_OK);
    ASSERT_EQ(ndim, 1u);
    EXPECT_EQ(dims[0], 21u);
    size_t size = 0;
    ASSERT_EQ(sd_env_obs_size(env.p, &size), SD_OK);
    std::vector<float> obs(size);
    ASSERT_EQ(sd_env_observation(env.p, obs.data(), obs.size()), SD_OK);
    EXPECT_EQ(obs[0], 1.0f);
    EXPECT_EQ(sd_env_observation(env.p, obs.data(), 3), SD_BUFFER_TOO_SMALL);
}

TEST(CApi, BevShape) {
    sd_env_options opts;
    sd_env_options_init(&opts);
    opts.obs_kind = "bev";
    opts.raster_resolution = 256;
    Env env("single-intersection", &opts);
    size_t dims[3];
    size_t ndim = 0;
    ASSERT_EQ(sd_env_obs_shape(env.p, dims, 3, &ndim), SD_OK);
    ASSERT_EQ(ndim, 3u);
    EXPECT_EQ(dims[0], 256u);
    EXPECT_EQ(dims[1], 256u);
    EXPECT_EQ(dims[2], 3u);
}

TEST(CApi, BadPathCarriesParseError) {
    sd_env* env = nullptr;
    EXPECT_EQ(sd_env_create("/no/such/scenario.json", nullptr, &env), SD_PARSE_ERROR);
    EXPECT_EQ(env, nullptr);
    EXPECT_NE(std::string(sd_last_error()).find("ParseError"), std::string::npos);
    EXPECT_EQ(sd_env_create("foo", nullptr, &env), SD_UNKNOWN_SCENARIO);
}

TEST(CApi, NullArguments) {
    EXPECT_EQ(sd_env_create(nullptr, nullptr, nullptr), SD_NULL_ARGUMENT);
    int n = 0;
    EXPECT_EQ(sd_env_num_actions(nullptr, &n), SD_NULL_ARGUMENT);
    EXPECT_EQ(sd_env_step(nullptr, 0, nullptr), SD_NULL_ARGUMENT);
}

TEST(CApi, StepAndTruncate) {
    Env env("single-intersection");
    sd_step_info info;
    int steps = 0;
    do {
        ASSERT_EQ(sd_env_step(env.p, 0, &info), SD_OK);
        ++steps;
        EXPECT_EQ(info.terminated, 0);
    } while (!info.truncated);
    EXPECT_EQ(steps, 720);
    EXPECT_EQ(info.sim_time, 3600.0);
    EXPECT_EQ(sd_env_step(env.p, 0, &info), SD_NOT_RESET);
    sd_metrics m;
    EXPECT_EQ(sd_env_metrics(env.p, &m), SD_OK);
    EXPECT_GT(m.completed, 0u);
}

TEST(CApi, InvalidAction) {
    Env env("single-intersection");
    sd_step_info info;
    EXPECT_EQ(sd_env_step(env.p, 9, &info), SD_INVALID_ACTION);
}

TEST(CApi, ClosedHandle) {
    Env env("single-intersection");
    ASSERT_EQ(sd_env_close(env.p), SD_OK);
    sd_step_info info;
    EXPECT_EQ(sd_env_step(env.p, 0, &info), SD_CLOSED_HANDLE);
    EXPECT_EQ(sd_env_reset(env.p, nullptr), SD_CLOSED_HANDLE);
}

TEST(CApi, ParityWithEpisodeRunner) {
    // Stepping by hand with a controller matches sd_run_episode for the same seed.
    Env a("single-intersection");
    Env b("single-intersection");
    sd_controller* ca = nullptr;
    sd_controller* cb = nullptr;
    ASSERT_EQ(sd_controller_create(a.p, "maxpressure", &ca), SD_OK);
    ASSERT_EQ(sd_controller_create(b.p, "maxpressure", &cb), SD_OK);
    const uint64_t seed = 5;
    sd_episode ep;
    ASSERT_EQ(sd_run_episode(a.p, ca, &seed, nullptr, &ep), SD_OK);

    ASSERT_EQ(sd_env_reset(b.p, &seed), SD_OK);
    ASSERT_EQ(sd_controller_reset(cb, b.p), SD_OK);
    sd_step_info info{};
    double sum = 0.0;
    do {
        int action = 0;
        ASSERT_EQ(sd_controller_act(cb, b.p, &action), SD_OK);
        ASSERT_EQ(sd_env_step(b.p, action, &info), SD_OK);
        sum += info.reward;
    } while (!info.truncated);
    sd_metrics m;
    ASSERT_EQ(sd_env_metrics(b.p, &m), SD_OK);
    EXPECT_EQ(sum, ep.reward_sum);
    EXPECT_EQ(m.avg_travel_time, ep.metrics.avg_travel_time);
    EXPECT_EQ(m.completed, ep.metrics.completed);
    uint64_t digest = 0;
    ASSERT_EQ(sd_env_digest(b.p, &digest), SD_OK);
    EXPECT_EQ(digest, ep.digest);
    sd_controller_destroy(ca);
    sd_controller_destroy(cb);
}

TEST(CApi, TrainSaveLoadGreedy) {
    sd_train_options opts;
    sd_train_options_init(&opts);
    EXPECT_EQ(opts.episodes, 100);
    opts.episodes = 2;
    sd_qtable* table = nullptr;
    double curve[2];
    ASSERT_EQ(sd_train("single-intersection", &opts, &table, curve), SD_OK) << sd_last_error();
    size_t size = 0;
    ASSERT_EQ(sd_qtable_size(table, &size), SD_OK);
    EXPECT_GT(size, 0u);
    const auto path = temp_path("table.txt");
    ASSERT_EQ(sd_qtable_save(table, path.c_str()), SD_OK);
    sd_qtable* loaded = nullptr;
    ASSERT_EQ(sd_qtable_load(path.c_str(), &loaded), SD_OK);
    size_t loaded_size = 0;
    ASSERT_EQ(sd_qtable_size(loaded, &loaded_size), SD_OK);
    EXPECT_EQ(loaded_size, size);

    sd_controller* ctl = nullptr;
    ASSERT_EQ(sd_controller_create_greedy(loaded, &ctl), SD_OK);
    sd_qtable_destroy(loaded);
    sd_qtable_destroy(table);
    Env env("single-intersection");
    sd_episode ep;
    EXPECT_EQ(sd_run_episode(env.p, ctl, nullptr, nullptr, &ep), SD_OK);
    EXPECT_EQ(ep.steps, 720u);
    sd_controller_destroy(ctl);
    std::filesystem::remove(path);
}

TEST(CApi, TrainRejectsRaster) {
    sd_train_options opts;
    sd_train_options_init(&opts);
    opts.episodes = 1;
    opts.obs_kind = "bev";
    sd_qtable* table = nullptr;
    EXPECT_EQ(sd_train("single-intersection", &opts, &table, nullptr), SD_UNSUPPORTED_OBS_KIND);
}

TEST(CApi, TrajectoryLogWritten) {
    Env env("single-intersection");
    sd_controller* ctl = nullptr;
    ASSERT_EQ(sd_controller_create(env.p, "fixed", &ctl), SD_OK);
    const auto path = temp_path("traj.csv");
    const uint64_t seed = 1;
    sd_episode ep;
    ASSERT_EQ(sd_run_episode(env.p, ctl, &seed, path.c_str(), &ep), SD_OK);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "t,id,segment,position,speed,waiting_accum");
    std::string row;
    EXPECT_TRUE(static_cast<bool>(std::getline(in, row)));
    sd_controller_destroy(ctl);
    std::filesystem::remove(path);
}

TEST(CApi, Formatting) {
    char* text = nullptr;
    ASSERT_EQ(sd_format_number(0.375, &text), SD_OK);
    EXPECT_STREQ(text, "0.375");
    sd_string_free(text);
    sd_metrics m{};
    m.avg_travel_time = 12.5;
    ASSERT_EQ(sd_format_json(&m, &text), SD_OK);
    EXPECT_NE(std::string(text).find("12.5"), std::string::npos);
    sd_string_free(text);
    sd_aggregate agg;
    sd_metrics two[2] = {m, m};
    two[1].avg_travel_time = 14.5;
    ASSERT_EQ(sd_aggregate_metrics(two, 2, &agg), SD_OK);
    EXPECT_DOUBLE_EQ(agg.avg_travel_time.mean, 13.5);
    EXPECT_EQ(agg.runs, 2u);
}

TEST(CApi, WriteFrames) {
    Env env("single-intersection");
    const auto stem = temp_path("frame");
    ASSERT_EQ(sd_env_write_frames(env.p, "bev", 32, stem.c_str()), SD_OK);
    EXPECT_TRUE(std::filesystem::exists(stem + ".ppm"));
    ASSERT_EQ(sd_env_write_frames(env.p, "multiview", 32, stem.c_str()), SD_OK);
    for (int v = 0; v < 4; ++v) {
        const auto p = stem + "_v" + std::to_string(v) + ".ppm";
        EXPECT_TRUE(std::filesystem::exists(p));
        std::filesystem::remove(p);
    }
    std::filesystem::remove(stem + ".ppm");
    EXPECT_EQ(sd_env_write_frames(env.p, "bev", 4, stem.c_str()), SD_BAD_RESOLUTION);
}
