// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/process.hpp"
#include "signal_dojo/env.hpp"
#include "signal_dojo/learner.hpp"
#include "signal_dojo/observe.hpp"
#include "signal_dojo/scenario.hpp"

using namespace signal_dojo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 4};
const std::vector<std::uint64_t> kEvalSeeds{1000, 1001, 1002, 1003, 1004};

struct Summary {
    double travel_time = 0.0;
    double throughput = 0.0;
    double waiting = 0.0;
};

Summary evaluate(const Scenario& s, Controller& ctl, const std::vector<std::uint64_t>& seeds) {
    Environment env(s.network, s.config);
    Summary sum;
    for (auto seed : seeds) {
        const auto r = run_episode(env, ctl, seed).report;
        sum.travel_time += r.avg_travel_time;
        sum.throughput += r.throughput_per_hour;
        sum.waiting += r.mean_accumulated_waiting;
    }
    const double n = static_cast<double>(seeds.size());
    return {sum.travel_time / n, sum.throughput / n, sum.waiting / n};
}

Summary evaluate(const Scenario& s, const std::string& kind, const std::vector<std::uint64_t>& seeds) {
    auto ctl = make_controller({kind, s.controller.plan, s.controller.sotl}, *s.network);
    return evaluate(s, *ctl, seeds);
}

// Criteria 1-3 share one set of runs.
struct Baselines {
    Summary fixed, sotl, mp;
    double seconds = 0.0;
};

const Baselines& baselines() {
    static const Baselines b = [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto s = builtin_scenario("single-intersection");
        Baselines r;
        r.fixed = evaluate(s, "fixed", kSeeds);
        r.sotl = evaluate(s, "sotl", kSeeds);
        r.mp = evaluate(s, "maxpressure", kSeeds);
        r.seconds = seconds_since(t0);
        return r;
    }();
    return b;
}

Outcome travel_time_ordering() {
    const auto& b = baselines();
    const bool ok = b.mp.travel_time < b.sotl.travel_time && b.sotl.travel_time < b.fixed.travel_time && b.seconds < 60.0;
    return {ok, fmt("travel time MP %.2f < SOTL %.2f < FT %.2f s; %.1f s wall", b.mp.travel_time, b.sotl.travel_time,
                    b.fixed.travel_time, b.seconds)};
}

Outcome max_pressure_ratio() {
    const auto& b = baselines();
    const double ratio = b.mp.travel_time / b.fixed.travel_time;
    return {ratio <= 0.75, fmt("MP / FT travel time = %.3f (limit 0.75)", ratio)};
}

Outcome throughput_ordering() {
    const auto& b = baselines();
    const bool ok = b.mp.throughput >= 1.02 * b.sotl.throughput && b.sotl.throughput >= 1.02 * b.fixed.throughput;
    return {ok, fmt("throughput MP %.1f, SOTL %.1f, FT %.1f veh/h; margins %+.1f%% and %+.1f%%", b.mp.throughput,
                    b.sotl.throughput, b.fixed.throughput, 100.0 * (b.mp.throughput / b.sotl.throughput - 1.0),
                    100.0 * (b.sotl.throughput / b.fixed.throughput - 1.0))};
}

// Audits one signal trace (one sample per physics sub-step). Returns the violation count.
std::size_t audit_trace(const std::vector<SignalSample>& trace, const NetworkSpec& net, const SignalTiming& timing,
                        std::int64_t dt_ms) {
    std::size_t violations = 0;
    const std::int64_t yellow_samples = timing.yellow_ms / dt_ms;
    std::int64_t green_run = 0;
    std::int64_t yellow_run = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& s = trace[i].state;
        const auto aspects = movement_aspects(s, net);
        std::vector<int> greens;
        for (std::size_t m = 0; m < aspects.size(); ++m) {
            if (aspects[m] == Aspect::green) greens.push_back(static_cast<int>(m));
        }
        for (int a : greens) {
            if (!net.phase_contains(s.current_phase, a)) ++violations;
            for (int b : greens) violations += a != b && net.conflicting(a, b) ? 1 : 0;
        }
        if (i > 0) {
            const auto& prev = trace[i - 1].state;
            if (s.current_phase != prev.current_phase) {
                // A completed yellow of exactly the configured length, after a long enough green.
                if (!prev.in_yellow || yellow_run != yellow_samples) ++violations;
                if (green_run * dt_ms < timing.min_green_ms) ++violations;
                green_run = 0;
                yellow_run = 0;
            } else if (prev.in_yellow && !s.in_yellow) {
                ++violations;  // yellow ended without a phase change
            }
        }
        if (s.in_yellow) {
            ++yellow_run;
        } else {
            if (yellow_run != 0) ++violations;  // green after yellow without a change
            ++green_run;
        }
    }
    return violations;
}

Outcome signal_safety() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int kSequences = 10'000;
    constexpr int kWithTraffic = 50;
    std::size_t violations = 0;
    std::size_t changes = 0;
    for (const char* name : {"single-intersection", "asym-intersection"}) {
        const auto s = builtin_scenario(name);
        // Signal behaviour under a random controller does not read traffic, so most sequences run
        // with demand removed; a subset runs with the scenario's demand.
        auto empty = s.config;
        empty.flows.clear();
        Environment quiet(s.network, empty);
        Environment busy(s.network, s.config);
        quiet.set_signal_trace(true);
        busy.set_signal_trace(true);
        std::mt19937_64 rng(std::hash<std::string>{}(name));
        const int phases = static_cast<int>(s.network->phase_count());
        for (int k = 0; k < kSequences; ++k) {
            Environment& env = k < kWithTraffic ? busy : quiet;
            env.reset(static_cast<std::uint64_t>(k));
            while (!env.truncated()) env.step(static_cast<int>(rng() % static_cast<std::uint64_t>(phases)));
            violations += audit_trace(env.signal_trace(), *s.network, s.config.timing, s.config.dt_ms);
            const auto& tr = env.signal_trace();
            for (std::size_t i = 1; i < tr.size(); ++i) {
                changes += tr[i].state.current_phase != tr[i - 1].state.current_phase ? 1 : 0;
            }
        }
    }
    return {violations == 0, fmt("%d sequences x 2 scenarios, %zu phase changes audited, %zu violations; %.1f s",
                                 kSequences, changes, violations, seconds_since(t0))};
}

// Checks conservation, delay bounds and gaps after every physics sub-step.
class InvariantSpy final : public Manager {
public:
    std::string_view name() const override { return "invariant-spy"; }
    void step(Environment& env) override {
        const auto& w = env.world();
        ++samples;
        if (w.spawned_total() != w.completed_total() + w.in_network() + w.pending_total()) ++conservation;
        const double d = env.recorder().last_delay();
        if (!(d >= 0.0 && d <= 1.0)) ++delay_bounds;
        const double length = w.params().vehicle_length;
        auto check = [&](const std::deque<VehicleState>& q) {
            for (std::size_t i = 1; i < q.size(); ++i) {
                if (q[i - 1].position - length - q[i].position < 0.0) ++collisions;
            }
        };
        for (std::size_t l = 0; l < w.network().lanes().size(); ++l) check(w.lane_vehicles(static_cast<int>(l)));
        for (std::size_t m = 0; m < w.network().movements().size(); ++m) check(w.link_vehicles(static_cast<int>(m)));
    }

    std::size_t samples = 0;
    std::size_t conservation = 0;
    std::size_t delay_bounds = 0;
    std::size_t collisions = 0;
};

Outcome conservation_and_bounds() {
    std::size_t samples = 0, conservation = 0, delay_bounds = 0, collisions = 0, episodes = 0;
    bool sigma_zero = true;
    for (const char* name : {"single-intersection", "asym-intersection"}) {
        const auto s = builtin_scenario(name);
        sigma_zero = sigma_zero && s.config.dynamics.sigma == 0.0;
        for (const char* kind : {"fixed", "sotl", "maxpressure", "random"}) {
            Environment env(s.network, s.config);
            auto spy = std::make_unique<InvariantSpy>();
            auto* probe = spy.get();
            env.register_manager(std::move(spy));
            auto ctl = make_controller({kind, s.controller.plan, s.controller.sotl}, *s.network);
            for (auto seed : kSeeds) {
                const auto r = run_episode(env, *ctl, seed).report;
                if (!(r.mean_delay >= 0.0 && r.mean_delay <= 1.0)) ++delay_bounds;
                ++episodes;
            }
            samples += probe->samples;
            conservation += probe->conservation;
            delay_bounds += probe->delay_bounds;
            collisions += probe->collisions;
        }
    }
    const bool ok = sigma_zero && conservation == 0 && delay_bounds == 0 && collisions == 0;
    return {ok, fmt("%zu episodes, %zu sub-steps: conservation %zu, delay-bound %zu, negative-gap %zu violations",
                    episodes, samples, conservation, delay_bounds, collisions)};
}

Outcome reward_telescoping() {
    double worst = 0.0;
    std::size_t episodes = 0;
    for (const char* name : {"single-intersection", "asym-intersection"}) {
        auto s = builtin_scenario(name);
        s.config.gamma = 1.0;
        for (const char* kind : {"fixed", "sotl", "maxpressure", "random"}) {
            Environment env(s.network, s.config);
            auto ctl = make_controller({kind, s.controller.plan, s.controller.sotl}, *s.network);
            for (auto seed : kSeeds) {
                const auto r = run_episode(env, *ctl, seed);
                const double expected = r.initial_waiting - r.final_waiting;
                const double scale = std::max(1.0, std::abs(expected));
                worst = std::max(worst, std::abs(r.reward_sum - expected) / scale);
                worst = std::max(worst, std::abs(r.discounted_return - expected) / scale);
                ++episodes;
            }
        }
    }
    return {worst <= 1e-9, fmt("%zu episodes, worst relative error %.3g", episodes, worst)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "sd_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    bool files_equal = true;
    std::size_t bytes = 0;
    for (const char* run : {"a", "b"}) {
        const auto out = dir / (std::string(run) + ".csv");
        const auto log = dir / (std::string(run) + "_traj.csv");
        const auto r = sdtest::run_command(sdtest::cli() + " run --controller sotl --seeds 0..4 --out " +
                                           out.string() + " --trajectory-log " + log.string());
        if (r.exit_code != 0) return {false, "cmd_run exited with " + std::to_string(r.exit_code)};
    }
    for (const std::string suffix : {".csv", "_traj_seed0.csv", "_traj_seed1.csv", "_traj_seed2.csv",
                                     "_traj_seed3.csv", "_traj_seed4.csv"}) {
        const auto a = slurp(dir / ("a" + suffix));
        const auto b = slurp(dir / ("b" + suffix));
        files_equal = files_equal && !a.empty() && a == b;
        bytes += a.size();
    }
    fs::remove_all(dir);

    // Step-by-step digests of two independent environments.
    const auto s = builtin_scenario("single-intersection");
    std::size_t steps = 0, mismatches = 0;
    for (const char* kind : {"sotl", "random"}) {
        Environment e1(s.network, s.config);
        Environment e2(s.network, s.config);
        auto c1 = make_controller({kind, {}, s.controller.sotl}, *s.network);
        auto c2 = make_controller({kind, {}, s.controller.sotl}, *s.network);
        for (auto seed : kSeeds) {
            auto o1 = e1.reset(seed);
            auto o2 = e2.reset(seed);
            c1->reset(e1);
            c2->reset(e2);
            while (!e1.truncated()) {
                auto r1 = e1.step(c1->act(e1, o1));
                auto r2 = e2.step(c2->act(e2, o2));
                ++steps;
                if (e1.world().digest() != e2.world().digest() || !(e1.signal() == e2.signal()) ||
                    r1.reward != r2.reward) {
                    ++mismatches;
                }
                o1 = std::move(r1.observation);
                o2 = std::move(r2.observation);
            }
        }
    }
    return {files_equal && mismatches == 0,
            fmt("cmd_run outputs %s (%zu bytes incl. trajectory logs); %zu step digests, %zu mismatches",
                files_equal ? "byte-identical" : "DIFFER", bytes, steps, mismatches)};
}

Outcome noise_model() {
    const auto s = builtin_scenario("single-intersection");
    const auto& net = *s.network;
    World w(s.network, s.config.dynamics, {}, s.config.dt_ms, s.config.waiting_window_ms);
    w.reset(0);
    // Every incoming lane full and stopped: each density and queue entry equals its factor.
    for (int lane : net.incoming_lanes()) {
        const int m = net.lane(lane).movements.front();
        for (int i = 0; i < net.lane(lane).capacity; ++i) w.place_vehicle(m, Stage::approaching, 7.5 * i, 0.0);
    }
    std::mt19937_64 rng(12345);
    std::vector<double> draws;
    draws.reserve(100'000);
    while (draws.size() < 100'000) {
        const auto obs = noisy_feature_obs(w, SignalState{}, s.config.timing, s.config.noise, rng);
        for (double d : obs.densities) draws.push_back(d);
        for (double q : obs.queues_norm) draws.push_back(q);
    }
    draws.resize(100'000);
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= static_cast<double>(draws.size());
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    const double sd = std::sqrt(var / static_cast<double>(draws.size() - 1));
    const bool ok = std::abs(mean - 0.700) <= 0.005 && std::abs(sd - 0.075) <= 0.005;
    return {ok, fmt("%zu draws: mean %.4f, std %.4f", draws.size(), mean, sd)};
}

// Criteria 9 and 10 share one trained table.
struct Learned {
    TrainResult result{QTable(1, 0.0, 0.0), {}};
    double seconds = 0.0;
    int bins = 4;
};

const Learned& learned() {
    static const Learned l = [] {
        const auto t0 = std::chrono::steady_clock::now();
        auto s = builtin_scenario("single-intersection");
        s.config.obs_kind = ObsKind::feature;
        LearnerParams p;
        p.gamma = s.config.gamma;
        Learned out;
        out.result = train(s.network, s.config, 100, p);
        out.bins = p.bins;
        out.seconds = seconds_since(t0);
        return out;
    }();
    return l;
}

Summary greedy_summary(ObsKind kind) {
    const auto& l = learned();
    auto s = builtin_scenario("single-intersection");
    s.config.obs_kind = kind;
    GreedyQController ctl(std::make_shared<const QTable>(l.result.table), l.bins);
    return evaluate(s, ctl, kEvalSeeds);
}

Outcome learning_works() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& l = learned();
    const auto& curve = l.result.curve;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        first += curve[i] / 10.0;
        last += curve[curve.size() - 10 + i] / 10.0;
    }
    const auto greedy = greedy_summary(ObsKind::feature);
    const auto random = evaluate(builtin_scenario("single-intersection"), "random", kEvalSeeds);
    const double total = l.seconds + seconds_since(t0);
    const double reduction = 1.0 - greedy.waiting / random.waiting;
    const bool ok = curve.size() == 100 && reduction >= 0.20 && last > first && total < 300.0;
    return {ok, fmt("waiting greedy %.1f vs random %.1f s (%.1f%% lower); curve first-10 %.1f, last-10 %.1f; "
                    "%.1f s",
                    greedy.waiting, random.waiting, 100.0 * reduction, first, last, total)};
}

Outcome noisy_degradation() {
    const auto clean = greedy_summary(ObsKind::feature);
    const auto noisy = greedy_summary(ObsKind::noisy_feature);
    const double ratio = noisy.travel_time / clean.travel_time;
    return {ratio >= 1.05, fmt("greedy travel time noisy %.2f vs clean %.2f s (%+.1f%%)", noisy.travel_time,
                               clean.travel_time, 100.0 * (ratio - 1.0))};
}

// True when the vehicle's footprint overlaps the square raster window with positive area.
// Footprints are axis-aligned on the built-in lanes; junction chords are tested by their corners' box.
bool in_extent(const VehicleState& v, const NetworkSpec& net, const DynamicsParams& p, double extent) {
    const auto& mv = net.movement(v.movement);
    Point a, b;  // segment the vehicle travels along
    double position = v.position;
    if (v.stage == Stage::crossing) {
        a = mv.chord_start;
        b = mv.chord_end;
        position = std::clamp(v.position / mv.link_length, 0.0, 1.0) * std::hypot(b.x - a.x, b.y - a.y);
    } else {
        const auto& lane = net.lane(v.stage == Stage::approaching ? mv.from_lane : mv.to_lane);
        a = lane.start;
        b = lane.end;
    }
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const Point dir{(b.x - a.x) / len, (b.y - a.y) / len};
    const Point normal{-dir.y, dir.x};
    const Point front{a.x + dir.x * position, a.y + dir.y * position};
    const Point back{front.x - dir.x * p.vehicle_length, front.y - dir.y * p.vehicle_length};
    const double hw = p.vehicle_width / 2.0;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Point end : {front, back}) {
        for (const double side : {-hw, hw}) {
            const double x = end.x + normal.x * side, y = end.y + normal.y * side;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    const double half = extent / 2.0;
    return x1 > -half && x0 < half && y1 > -half && y0 < half;
}

Outcome raster_sanity() {
    const auto s = builtin_scenario("single-intersection");
    const auto& net = *s.network;
    const double extent = default_extent(net);
    World probe(s.network, s.config.dynamics, {}, s.config.dt_ms, s.config.waiting_window_ms);
    probe.reset(0);
    const auto empty = bev_raster(probe, SignalState{}, 256, extent);
    const bool shape = empty.resolution == 256 && empty.pixels.size() == 256u * 256u * 3u;

    std::mt19937_64 rng(2024);
    std::size_t mismatches = 0, with_visible = 0, without_visible = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        World w(s.network, s.config.dynamics, {}, s.config.dt_ms, s.config.waiting_window_ms);
        w.reset(0);
        const int count = static_cast<int>(rng() % 5);
        for (int i = 0; i < count; ++i) {
            const int m = static_cast<int>(rng() % net.movements().size());
            const auto& mv = net.movement(m);
            // Half the vehicles go to the far, out-of-window end of an incoming lane.
            if (rng() % 2 == 0) {
                w.place_vehicle(m, Stage::approaching, uniform01(rng) * 40.0, 0.0);
            } else {
                const auto stage = static_cast<Stage>(rng() % 3);
                const double len = stage == Stage::approaching ? net.lane(mv.from_lane).length
                                   : stage == Stage::departing ? net.lane(mv.to_lane).length
                                                               : mv.link_length;
                w.place_vehicle(m, stage, uniform01(rng) * len, 0.0);
            }
        }
        bool visible = false;
        w.for_each_vehicle([&](const VehicleState& v) { visible = visible || in_extent(v, net, w.params(), extent); });
        const auto r = bev_raster(w, SignalState{}, 256, extent);
        if ((r.channel_mass(1) > 0.0) != visible) ++mismatches;
        (visible ? with_visible : without_visible) += 1;
    }
    const bool ok = shape && mismatches == 0 && with_visible > 0 && without_visible > 0;
    return {ok, fmt("shape %dx%dx3; 1000 worlds (%zu with in-extent vehicles, %zu without): %zu mismatches",
                    empty.resolution, empty.resolution, with_visible, without_visible, mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional arguments select criteria by number.
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, travel_time_ordering}, {2, max_pressure_ratio}, {3, throughput_ordering},
        {4, signal_safety},        {5, conservation_and_bounds}, {6, reward_telescoping},
        {7, determinism},          {8, noise_model},        {9, learning_works},
        {10, noisy_degradation},   {11, raster_sanity}};
    int failures = 0;
    int ran = 0;
    for (const auto& [id, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        ++ran;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d/%d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}
