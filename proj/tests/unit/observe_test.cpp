#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "signal_dojo/observe.hpp"
#include "test_support.hpp"

using namespace signal_dojo;

TEST(FeatureObs, EmptyWorld) {
    const auto sc = sdtest::single();
    const auto w = sdtest::empty_world(sc);
    const auto obs = feature_obs(w, SignalState{}, sc.config.timing);
    EXPECT_EQ(obs.phase_onehot, (std::vector<double>{1, 0, 0, 0}));
    EXPECT_EQ(obs.min_green_flag, 0.0);
    for (double d : obs.densities) EXPECT_EQ(d, 0.0);
    for (double q : obs.queues_norm) EXPECT_EQ(q, 0.0);
    EXPECT_EQ(obs.size(), 21u);
    EXPECT_EQ(obs.flatten().size(), 21u);
}

TEST(FeatureObs, MinGreenFlag) {
    const auto sc = sdtest::single();
    const auto w = sdtest::empty_world(sc);
    SignalState s;
    s.phase_elapsed_ms = 10'000;
    EXPECT_EQ(feature_obs(w, s, sc.config.timing).min_green_flag, 1.0);
}

TEST(FeatureObs, FullStoppedLane) {
    const auto sc = sdtest::single();
    auto w = sdtest::empty_world(sc);
    const auto& n = *sc.network;
    const int m = sdtest::movement(n, "E_T");
    const int lane = sdtest::lane(n, "E_in_0");
    for (int i = 0; i < n.lane(lane).capacity; ++i) w.place_vehicle(m, Stage::approaching, 7.5 * i, 0.0);
    const auto obs = feature_obs(w, SignalState{}, sc.config.timing);
    std::size_t slot = 0;
    while (n.incoming_lanes()[slot] != lane) ++slot;
    EXPECT_EQ(obs.densities[slot], 1.0);
    EXPECT_EQ(obs.queues_norm[slot], 1.0);
}

TEST(FeatureObs, Deterministic) {
    const auto sc = sdtest::single();
    World w(sc.network, sc.config.dynamics, sc.config.flows, 1000, 1'000'000);
    w.reset(5);
    std::vector<Aspect> red(sc.network->movements().size(), Aspect::red);
    for (int i = 0; i < 60; ++i) {
        w.spawn_step();
        w.advance(red);
    }
    EXPECT_EQ(feature_obs(w, SignalState{}, sc.config.timing), feature_obs(w, SignalState{}, sc.config.timing));
}

TEST(NoisyObs, IdentityNoiseMatchesClean) {
    const auto sc = sdtest::single();
    World w(sc.network, sc.config.dynamics, sc.config.flows, 1000, 1'000'000);
    w.reset(5);
    std::vector<Aspect> red(sc.network->movements().size(), Aspect::red);
    for (int i = 0; i < 60; ++i) {
        w.spawn_step();
        w.advance(red);
    }
    NoiseParams identity{1.0, 0.0, 0.0};
    std::mt19937_64 rng(1);
    EXPECT_EQ(noisy_feature_obs(w, SignalState{}, sc.config.timing, identity, rng),
              feature_obs(w, SignalState{}, sc.config.timing));
}

TEST(NoisyObs, ScalesFullLaneAndClamps) {
    const auto sc = sdtest::single();
    auto w = sdtest::empty_world(sc);
    const auto& n = *sc.network;
    const int m = sdtest::movement(n, "E_T");
    const int lane = sdtest::lane(n, "E_in_0");
    for (int i = 0; i < n.lane(lane).capacity; ++i) w.place_vehicle(m, Stage::approaching, 7.5 * i, 0.0);
    std::size_t slot = 0;
    while (n.incoming_lanes()[slot] != lane) ++slot;
    std::mt19937_64 rng(1);
    NoiseParams fixed{0.70, 0.0, 0.0};
    const auto obs = noisy_feature_obs(w, SignalState{}, sc.config.timing, fixed, rng);
    EXPECT_DOUBLE_EQ(obs.densities[slot], 0.70);
    NoiseParams negative{-1.0, 0.0, 0.0};
    const auto neg = noisy_feature_obs(w, SignalState{}, sc.config.timing, negative, rng);
    EXPECT_EQ(neg.densities[slot], 0.0);
    EXPECT_EQ(neg.phase_onehot, obs.phase_onehot);
}

TEST(Bev, ShapeAndEmptyVehicleChannel) {
    const auto sc = sdtest::single();
    const auto w = sdtest::empty_world(sc);
    const auto r = bev_raster(w, SignalState{}, 256, default_extent(*sc.network));
    EXPECT_EQ(r.resolution, 256);
    EXPECT_EQ(r.pixels.size(), 256u * 256u * 3u);
    EXPECT_EQ(r.channel_mass(1), 0.0);
    EXPECT_GT(r.channel_mass(0), 0.0);
    EXPECT_GT(r.channel_mass(2), 0.0);
    for (float p : r.pixels) {
        EXPECT_GE(p, 0.0f);
        EXPECT_LE(p, 1.0f);
    }
}

TEST(Bev, RejectsTinyResolution) {
    const auto sc = sdtest::single();
    const auto w = sdtest::empty_world(sc);
    EXPECT_EQ(sdtest::error_of([&] { bev_raster(w, SignalState{}, 7, 100.0); }), ErrorCode::bad_resolution);
}

TEST(Bev, VehicleAtNorthStopLineLandsInNorthBand) {
    const auto sc = sdtest::single();
    auto w = sdtest::empty_world(sc);
    const auto& n = *sc.network;
    w.place_vehicle(sdtest::movement(n, "N_T"), Stage::approaching, 250.0, 0.0);
    const int res = 128;
    const auto r = bev_raster(w, SignalState{}, res, default_extent(n));
    ASSERT_GT(r.channel_mass(1), 0.0);
    int min_row = res, max_row = -1, min_col = res, max_col = -1;
    for (int row = 0; row < res; ++row) {
        for (int col = 0; col < res; ++col) {
            if (r.at(row, col, 1) > 0.0f) {
                min_row = std::min(min_row, row);
                max_row = std::max(max_row, row);
                min_col = std::min(min_col, col);
                max_col = std::max(max_col, col);
            }
        }
    }
    EXPECT_LT(max_row, res / 2);  // north is up
    EXPECT_LE(max_col, res / 2);  // southbound traffic keeps west
    EXPECT_GE(min_col, res / 2 - 4);
    EXPECT_LE(max_row - min_row, 4);
}

TEST(Bev, MassMonotoneInVehicles) {
    const auto sc = sdtest::single();
    auto w = sdtest::empty_world(sc);
    const auto& n = *sc.network;
    std::mt19937_64 rng(9);
    double last = 0.0;
    for (int i = 0; i < 30; ++i) {
        const int m = static_cast<int>(rng() % n.movements().size());
        w.place_vehicle(m, Stage::approaching, uniform01(rng) * 240.0, 0.0);
        const double mass = bev_raster(w, SignalState{}, 64, default_extent(n)).channel_mass(1);
        EXPECT_GE(mass, last);
        last = mass;
    }
}

TEST(MultiView, EmptyWorldShapes) {
    const auto sc = sdtest::single();
    const auto w = sdtest::empty_world(sc);
    const auto views = multi_view_raster(w, SignalState{}, 64, default_extent(*sc.network));
    ASSERT_EQ(views.size(), 4u);
    for (const auto& v : views) {
        EXPECT_EQ(v.pixels.size(), 64u * 64u * 3u);
        EXPECT_EQ(v.channel_mass(1), 0.0);
    }
}

TEST(MultiView, NorthVehiclesSeenByExactlyOneView) {
    const auto sc = sdtest::single();
    auto w = sdtest::empty_world(sc);
    const auto& n = *sc.network;
    w.place_vehicle(sdtest::movement(n, "N_T"), Stage::approaching, 200.0, 0.0);
    w.place_vehicle(sdtest::movement(n, "N_L"), Stage::approaching, 150.0, 0.0);
    const auto views = multi_view_raster(w, SignalState{}, 64, default_extent(n));
    int lit = 0;
    for (const auto& v : views) lit += v.channel_mass(1) > 0.0 ? 1 : 0;
    EXPECT_EQ(lit, 1);
    EXPECT_GT(views[0].channel_mass(1), 0.0);
}

TEST(MultiView, EveryVehicleVisibleSomewhere) {
    const auto sc = sdtest::single();
    const auto& n = *sc.network;
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        auto w = sdtest::empty_world(sc);
        const int m = static_cast<int>(rng() % n.movements().size());
        const auto stage = static_cast<Stage>(rng() % 3);
        // Incoming lanes start 270 m out; the first 25 m fall outside the default extent.
        const double lo = stage == Stage::approaching ? 25.0 : 0.0;
        const double hi = stage == Stage::approaching ? 250.0 : stage == Stage::departing ? 100.0 : 10.0;
        w.place_vehicle(m, stage, lo + uniform01(rng) * (hi - lo), 0.0);
        const auto views = multi_view_raster(w, SignalState{}, 64, default_extent(n));
        double total = 0.0;
        for (const auto& v : views) total += v.channel_mass(1);
        EXPECT_GT(total, 0.0) << "movement " << m << " stage " << stage_name(stage);
    }
}
