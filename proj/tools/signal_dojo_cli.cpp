// signal_dojo: run, compare, train and render from the command line.
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "signal_dojo/signal_dojo.h"

namespace {

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

// Carries a C API failure up to main().
struct ApiFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(sd_status status) {
    if (status != SD_OK) throw ApiFailure(sd_last_error()[0] ? sd_last_error() : sd_status_name(status));
}

struct EnvDeleter {
    void operator()(sd_env* e) const { sd_env_destroy(e); }
};
struct ControllerDeleter {
    void operator()(sd_controller* c) const { sd_controller_destroy(c); }
};
struct TableDeleter {
    void operator()(sd_qtable* t) const { sd_qtable_destroy(t); }
};
using EnvPtr = std::unique_ptr<sd_env, EnvDeleter>;
using ControllerPtr = std::unique_ptr<sd_controller, ControllerDeleter>;
using TablePtr = std::unique_ptr<sd_qtable, TableDeleter>;

std::string take(char* text) {
    std::string s = text ? text : "";
    sd_string_free(text);
    return s;
}

/// "0,1,2", "0..4" or a mix such as "0..2,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) throw CLI::ValidationError("--seeds", "empty seed entry");
        const auto dots = item.find("..");
        try {
            std::size_t used = 0;
            if (dots == std::string::npos) {
                seeds.push_back(std::stoull(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } else {
                const std::string lo_text = item.substr(0, dots);
                const std::string hi_text = item.substr(dots + 2);
                const auto lo = std::stoull(lo_text, &used);
                if (used != lo_text.size()) throw std::invalid_argument(item);
                const auto hi = std::stoull(hi_text, &used);
                if (used != hi_text.size() || hi < lo) throw std::invalid_argument(item);
                for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw CLI::ValidationError("--seeds", "bad seed entry '" + item + "'");
        }
    }
    if (seeds.empty()) throw CLI::ValidationError("--seeds", "no seeds given");
    return seeds;
}

std::vector<int> parse_steps(const std::string& text) {
    std::vector<int> steps;
    for (auto s : parse_seeds(text)) steps.push_back(static_cast<int>(s));
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

unsigned worker_count(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SIGNAL_DOJO_THREADS")) {
        try {
            n = static_cast<unsigned>(std::max(1, std::stoi(env)));
        } catch (const std::logic_error&) {
            n = 1;
        }
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

/// Runs f(i) for i in [0, count) on worker threads; rethrows the first failure by index.
template <class F>
void parallel_for(std::size_t count, F&& f) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned n = worker_count(count);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct Options {
    std::string scenario = "single-intersection";
    std::vector<std::string> controllers;
    std::string seeds = "0..4";
    int episodes = 100;
    int resolution = 64;
    std::string obs;
    std::string out;
    std::string format = "csv";
    std::string trajectory_log;
    std::string steps = "0";
    std::string qtable;
    std::string curve;
};

EnvPtr open_env(const Options& o, std::optional<std::uint64_t> seed = std::nullopt, int resolution = 0) {
    sd_env_options opts;
    sd_env_options_init(&opts);
    if (!o.obs.empty()) opts.obs_kind = o.obs.c_str();
    if (seed) {
        opts.has_seed = 1;
        opts.seed = *seed;
    }
    opts.raster_resolution = resolution;
    sd_env* env = nullptr;
    check(sd_env_create(o.scenario.c_str(), &opts, &env));
    return EnvPtr(env);
}

TablePtr load_table(const std::string& path) {
    sd_qtable* t = nullptr;
    check(sd_qtable_load(path.c_str(), &t));
    return TablePtr(t);
}

ControllerPtr make_controller(sd_env* env, const std::string& kind, const sd_qtable* table) {
    sd_controller* c = nullptr;
    if (kind == "rl") {
        check(sd_controller_create_greedy(table, &c));
    } else {
        check(sd_controller_create(env, kind.c_str(), &c));
    }
    return ControllerPtr(c);
}

std::string scenario_name(const Options& o) {
    EnvPtr env = open_env(o);
    const char* name = nullptr;
    check(sd_env_scenario_name(env.get(), &name));
    return name;
}

std::string trajectory_path(const std::string& base, std::uint64_t seed, std::size_t seed_count) {
    if (base.empty()) return {};
    if (seed_count == 1) return base;
    std::filesystem::path p(base);
    const std::string stem = p.stem().string() + "_seed" + std::to_string(seed);
    return (p.parent_path() / (stem + p.extension().string())).string();
}

/// One episode per seed, ordered by seed position.
std::vector<sd_metrics> run_seeds(const Options& o, const std::string& controller,
                                  const std::vector<std::uint64_t>& seeds, const sd_qtable* table) {
    std::vector<sd_metrics> reports(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        EnvPtr env = open_env(o);
        ControllerPtr ctl = make_controller(env.get(), controller, table);
        const std::string log = trajectory_path(o.trajectory_log, seeds[i], seeds.size());
        sd_episode ep;
        check(sd_run_episode(env.get(), ctl.get(), &seeds[i], log.empty() ? nullptr : log.c_str(), &ep));
        reports[i] = ep.metrics;
    });
    return reports;
}

nlohmann::ordered_json metrics_json(const sd_metrics& m) {
    return {{"avg_travel_time", m.avg_travel_time},
            {"throughput_per_hour", m.throughput_per_hour},
            {"mean_queue", m.mean_queue},
            {"mean_delay", m.mean_delay},
            {"mean_accumulated_waiting", m.mean_accumulated_waiting},
            {"co2_rate", m.co2_rate},
            {"completed", m.completed},
            {"unfinished", m.unfinished},
            {"spawned", m.spawned}};
}

nlohmann::ordered_json aggregate_json(const sd_aggregate& a) {
    auto s = [](const sd_stat& x) { return nlohmann::ordered_json{{"mean", x.mean}, {"std", x.std}}; };
    return {{"avg_travel_time", s(a.avg_travel_time)},
            {"throughput_per_hour", s(a.throughput_per_hour)},
            {"mean_queue", s(a.mean_queue)},
            {"mean_delay", s(a.mean_delay)},
            {"mean_accumulated_waiting", s(a.mean_accumulated_waiting)},
            {"co2_rate", s(a.co2_rate)},
            {"runs", a.runs}};
}

sd_aggregate aggregate(const std::vector<sd_metrics>& reports) {
    sd_aggregate a;
    check(sd_aggregate_metrics(reports.data(), reports.size(), &a));
    return a;
}

std::string csv_block(const std::string& scenario, const std::string& controller,
                      const std::vector<std::uint64_t>& seeds, const std::vector<sd_metrics>& reports) {
    std::string text;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        char* row = nullptr;
        check(sd_format_csv_row(scenario.c_str(), controller.c_str(), seeds[i], &reports[i], &row));
        text += take(row);
    }
    const sd_aggregate a = aggregate(reports);
    char* rows = nullptr;
    check(sd_format_aggregate_csv(scenario.c_str(), controller.c_str(), &a, &rows));
    return text + take(rows);
}

std::string csv_header() {
    char* h = nullptr;
    check(sd_format_csv_header(&h));
    return take(h);
}

void emit(const Options& o, const std::string& text) {
    if (o.out.empty()) {
        std::cout << text << std::flush;
        return;
    }
    const std::filesystem::path p(o.out);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(o.out, std::ios::binary);
    f << text;
    f.flush();
    if (!f) throw ApiFailure("cannot write '" + o.out + "'");
}

TablePtr table_for(const Options& o, const std::string& controller) {
    if (controller != "rl") return nullptr;
    if (o.qtable.empty()) throw CLI::ValidationError("--qtable", "controller rl needs --qtable");
    return load_table(o.qtable);
}

void cmd_run(const Options& o) {
    const auto seeds = parse_seeds(o.seeds);
    std::string controller;
    if (o.controllers.size() > 1) throw CLI::ValidationError("--controller", "run takes one controller");
    if (o.controllers.empty()) {
        EnvPtr env = open_env(o);
        const char* kind = nullptr;
        check(sd_env_default_controller(env.get(), &kind));
        controller = kind;
    } else {
        controller = o.controllers.front();
    }
    TablePtr table = table_for(o, controller);
    const std::string scenario = scenario_name(o);
    const auto reports = run_seeds(o, controller, seeds, table.get());
    if (o.format == "json") {
        nlohmann::ordered_json doc = {{"scenario", scenario}, {"controller", controller}};
        doc["runs"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            doc["runs"].push_back({{"seed", seeds[i]}, {"metrics", metrics_json(reports[i])}});
        }
        doc["aggregate"] = aggregate_json(aggregate(reports));
        emit(o, doc.dump(2) + "\n");
    } else {
        emit(o, csv_header() + csv_block(scenario, controller, seeds, reports));
    }
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string table_text(const std::vector<std::string>& controllers, const std::vector<sd_aggregate>& aggs) {
    const std::vector<std::string> header = {"controller",  "travel_time_s", "throughput_veh_h", "queue_veh",
                                             "delay",       "waiting_s",     "co2_g_s"};
    std::vector<std::vector<std::string>> rows = {header};
    for (std::size_t i = 0; i < controllers.size(); ++i) {
        const auto& a = aggs[i];
        auto cell = [](const sd_stat& s) { return fixed2(s.mean) + " ± " + fixed2(s.std); };
        rows.push_back({controllers[i], cell(a.avg_travel_time), cell(a.throughput_per_hour), cell(a.mean_queue),
                        cell(a.mean_delay), cell(a.mean_accumulated_waiting), cell(a.co2_rate)});
    }
    // Display width, counting the two-byte '±' as one column.
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char c : s) w += (c & 0xC0) != 0x80;
        return w;
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], width(r[c]));
    }
    std::string text;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            text += r[c];
            if (c + 1 < r.size()) text += std::string(widths[c] - width(r[c]) + 2, ' ');
        }
        text += '\n';
    }
    return text;
}

void cmd_compare(const Options& o) {
    if (o.controllers.size() < 2) throw CLI::ValidationError("--controller", "compare needs at least two controllers");
    const auto seeds = parse_seeds(o.seeds);
    const std::string scenario = scenario_name(o);
    std::vector<sd_aggregate> aggs;
    std::string csv = csv_header();
    nlohmann::ordered_json doc = {{"scenario", scenario}, {"controllers", nlohmann::ordered_json::array()}};
    for (const auto& controller : o.controllers) {
        TablePtr table = table_for(o, controller);
        const auto reports = run_seeds(o, controller, seeds, table.get());
        aggs.push_back(aggregate(reports));
        csv += csv_block(scenario, controller, seeds, reports);
        doc["controllers"].push_back({{"controller", controller}, {"aggregate", aggregate_json(aggs.back())}});
    }
    if (o.format == "json") {
        emit(o, doc.dump(2) + "\n");
    } else if (o.format == "table") {
        emit(o, table_text(o.controllers, aggs));
    } else {
        emit(o, csv);
    }
}

void cmd_train(const Options& o) {
    if (o.out.empty()) throw CLI::ValidationError("--out", "train needs --out for the Q-table");
    const auto seeds = parse_seeds(o.seeds);
    sd_train_options opts;
    sd_train_options_init(&opts);
    opts.episodes = o.episodes;
    if (!o.obs.empty()) opts.obs_kind = o.obs.c_str();
    std::vector<double> curve(static_cast<std::size_t>(std::max(o.episodes, 0)));
    sd_qtable* raw = nullptr;
    check(sd_train(o.scenario.c_str(), &opts, &raw, curve.data()));
    TablePtr table(raw);

    const std::filesystem::path out(o.out);
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    check(sd_qtable_save(table.get(), o.out.c_str()));
    const std::string curve_path = o.curve.empty() ? o.out + ".curve.csv" : o.curve;
    {
        std::ofstream f(curve_path, std::ios::binary);
        f << "episode,reward_sum\n";
        for (std::size_t e = 0; e < curve.size(); ++e) {
            char* v = nullptr;
            check(sd_format_number(curve[e], &v));
            f << e << ',' << take(v) << '\n';
        }
        f.flush();
        if (!f) throw ApiFailure("cannot write '" + curve_path + "'");
    }

    const std::string scenario = scenario_name(o);
    const auto reports = run_seeds(o, "rl", seeds, table.get());
    std::cout << csv_header() << csv_block(scenario, "rl", seeds, reports) << std::flush;
}

void cmd_render(const Options& o) {
    if (o.out.empty()) throw CLI::ValidationError("--out", "render needs --out for the frame directory");
    const std::string kind = o.obs.empty() ? "bev" : o.obs;
    if (kind != "bev" && kind != "multiview") throw CLI::ValidationError("--obs", "render supports bev or multiview");
    const auto steps = parse_steps(o.steps);
    const auto seeds = parse_seeds(o.seeds);
    std::string controller = o.controllers.empty() ? "fixed" : o.controllers.front();
    TablePtr table = table_for(o, controller);

    Options feature_opts = o;
    feature_opts.obs = controller == "rl" ? "feature" : "";
    EnvPtr env = open_env(feature_opts, seeds.front());
    ControllerPtr ctl = make_controller(env.get(), controller, table.get());
    check(sd_env_reset(env.get(), &seeds.front()));
    check(sd_controller_reset(ctl.get(), env.get()));
    std::filesystem::create_directories(o.out);

    int step = 0;
    for (int target : steps) {
        int truncated = 0;
        while (step < target) {
            check(sd_env_truncated(env.get(), &truncated));
            if (truncated) break;
            int action = 0;
            check(sd_controller_act(ctl.get(), env.get(), &action));
            check(sd_env_step(env.get(), action, nullptr));
            ++step;
        }
        if (step < target) break;
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d", step);
        const std::string stem = (std::filesystem::path(o.out) / name).string();
        check(sd_env_write_frames(env.get(), kind.c_str(), o.resolution, stem.c_str()));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Traffic-signal-control simulator and benchmark harness"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::string> controllers = {"fixed", "sotl", "maxpressure", "rl", "random"};

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "Built-in name or scenario file")->capture_default_str();
        sub->add_option("--seeds", o.seeds, "Seeds, e.g. 0..4 or 1,5,9")->capture_default_str();
        sub->add_option("--out", o.out, "Output path");
        sub->add_option("--obs", o.obs, "Observation kind")
            ->check(CLI::IsMember({"feature", "noisy_feature", "bev", "multiview"}));
        sub->add_option("--qtable", o.qtable, "Q-table file for controller rl");
    };

    auto* run = app.add_subcommand("run", "Run one controller over seeds");
    add_common(run);
    run->add_option("--controller", o.controllers, "Controller")->check(CLI::IsMember(controllers));
    run->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--trajectory-log", o.trajectory_log, "Per-step vehicle log (CSV)");

    auto* compare = app.add_subcommand("compare", "Compare controllers over seeds");
    add_common(compare);
    compare->add_option("--controller", o.controllers, "Controllers, in output order")
        ->delimiter(',')
        ->check(CLI::IsMember(controllers));
    compare->add_option("--format", o.format, "csv, table or json")->check(CLI::IsMember({"csv", "table", "json"}));

    auto* trainer = app.add_subcommand("train", "Train the tabular Q-learner");
    add_common(trainer);
    trainer->add_option("--episodes", o.episodes, "Training episodes")->check(CLI::NonNegativeNumber);
    trainer->add_option("--curve", o.curve, "Learning-curve CSV (default <out>.curve.csv)");

    auto* render = app.add_subcommand("render", "Dump raster frames");
    add_common(render);
    render->add_option("--controller", o.controllers, "Controller")->check(CLI::IsMember(controllers));
    render->add_option("--steps", o.steps, "Decision steps to capture, e.g. 0,10,100")->capture_default_str();
    render->add_option("--resolution", o.resolution, "Pixels per side")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*run) cmd_run(o);
        if (*compare) cmd_compare(o);
        if (*trainer) cmd_train(o);
        if (*render) cmd_render(o);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return kUsageError;
    } catch (const ApiFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}
