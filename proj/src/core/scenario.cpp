#include "signal_dojo/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "signal_dojo/error.hpp"

namespace signal_dojo {

using nlohmann::json;

namespace {

std::int64_t seconds_to_ms(double s) { return static_cast<std::int64_t>(std::llround(s * 1000.0)); }
double ms_to_seconds(std::int64_t ms) { return static_cast<double>(ms) / 1000.0; }

std::optional<double> cardinal_heading(std::string_view token) {
    if (token == "N") return 0.0;
    if (token == "E") return 90.0;
    if (token == "S") return 180.0;
    if (token == "W") return 270.0;
    return std::nullopt;
}

json parse_document(std::string_view text) {
    try {
        json doc = json::parse(text.begin(), text.end());
        if (!doc.is_object()) throw Error(ErrorCode::parse_error, "scenario document must be an object");
        return doc;
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
    }
}

NetworkDescription parse_network(const json& doc) {
    NetworkDescription d;
    d.junction_extent = doc.value("junction_extent", 20.0);
    if (!doc.contains("lanes")) throw Error(ErrorCode::parse_error, "missing 'lanes' section");
    std::map<std::string, std::size_t> approach_index;
    for (const auto& l : doc.at("lanes")) {
        const std::string approach = l.at("approach").get<std::string>();
        auto it = approach_index.find(approach);
        if (it == approach_index.end()) {
            Approach a;
            a.id = approach;
            if (l.contains("heading")) {
                const auto& h = l.at("heading");
                if (h.is_number()) {
                    a.heading_deg = h.get<double>();
                } else if (auto c = cardinal_heading(h.get<std::string>())) {
                    a.heading_deg = *c;
                } else {
                    throw Error(ErrorCode::parse_error, "bad heading for approach '" + approach + "'");
                }
            } else if (auto c = cardinal_heading(approach)) {
                a.heading_deg = *c;
            } else {
                throw Error(ErrorCode::parse_error, "approach '" + approach + "' needs a heading");
            }
            it = approach_index.emplace(approach, d.approaches.size()).first;
            d.approaches.push_back(std::move(a));
        }
        Lane lane{l.at("id").get<std::string>(), l.at("length").get<double>(), l.at("speed_limit").get<double>()};
        const std::string dir = l.at("direction").get<std::string>();
        auto& a = d.approaches[it->second];
        if (dir == "in") {
            a.incoming_lanes.push_back(std::move(lane));
        } else if (dir == "out") {
            a.outgoing_lanes.push_back(std::move(lane));
        } else {
            throw Error(ErrorCode::parse_error, "lane direction must be 'in' or 'out'");
        }
    }
    if (!doc.contains("movements")) throw Error(ErrorCode::parse_error, "missing 'movements' section");
    for (const auto& m : doc.at("movements")) {
        const auto turn = parse_turn(m.value("turn", std::string("through")));
        if (!turn) throw Error(ErrorCode::parse_error, "bad turn for movement");
        d.movements.push_back({m.at("id").get<std::string>(), m.at("from").get<std::string>(),
                               m.at("to").get<std::string>(), *turn});
    }
    if (!doc.contains("phases")) throw Error(ErrorCode::parse_error, "missing 'phases' section");
    int index = 0;
    for (const auto& p : doc.at("phases")) {
        d.green_phases.push_back({index++, p.get<std::vector<std::string>>()});
    }
    if (doc.contains("conflicts")) {
        for (const auto& c : doc.at("conflicts")) {
            const auto pair = c.get<std::vector<std::string>>();
            if (pair.size() != 2) throw Error(ErrorCode::parse_error, "conflict entries must be pairs");
            d.declared_conflicts.emplace_back(pair[0], pair[1]);
        }
    }
    return d;
}

json network_json(const NetworkSpec& network) {
    const auto& d = network.description();
    json doc;
    doc["junction_extent"] = d.junction_extent;
    json lanes = json::array();
    for (const auto& a : d.approaches) {
        auto put = [&](const Lane& lane, const char* dir) {
            lanes.push_back({{"id", lane.id},
                             {"approach", a.id},
                             {"heading", a.heading_deg},
                             {"direction", dir},
                             {"length", lane.length},
                             {"speed_limit", lane.speed_limit}});
        };
        for (const auto& lane : a.incoming_lanes) put(lane, "in");
        for (const auto& lane : a.outgoing_lanes) put(lane, "out");
    }
    doc["lanes"] = std::move(lanes);
    json movements = json::array();
    for (const auto& m : d.movements) {
        movements.push_back({{"id", m.id}, {"from", m.from_lane}, {"to", m.to_lane}, {"turn", turn_name(m.turn)}});
    }
    doc["movements"] = std::move(movements);
    json phases = json::array();
    for (const auto& p : d.green_phases) phases.push_back(p.movements);
    doc["phases"] = std::move(phases);
    json conflicts = json::array();
    for (const auto& [a, b] : d.declared_conflicts) conflicts.push_back({a, b});
    doc["conflicts"] = std::move(conflicts);
    return doc;
}

}  // namespace

NetworkSpec load_network(std::string_view text, double vehicle_pitch) {
    const json doc = parse_document(text);
    return NetworkSpec(guarded([&] { return parse_network(doc); }), vehicle_pitch);
}

Scenario load_scenario(std::string_view text) {
    const json doc = parse_document(text);
    Scenario s;
    guarded([&] {
        s.name = doc.value("name", std::string("custom"));
        auto& c = s.config;
        if (doc.contains("dynamics")) {
            const auto& d = doc.at("dynamics");
            c.dynamics.accel_max = d.value("accel_max", c.dynamics.accel_max);
            c.dynamics.decel_max = d.value("decel_max", c.dynamics.decel_max);
            c.dynamics.vehicle_length = d.value("vehicle_length", c.dynamics.vehicle_length);
            c.dynamics.min_gap = d.value("min_gap", c.dynamics.min_gap);
            c.dynamics.tau = d.value("tau", c.dynamics.tau);
            c.dynamics.sigma = d.value("sigma", c.dynamics.sigma);
            c.dynamics.halt_threshold = d.value("halt_threshold", c.dynamics.halt_threshold);
        }
        if (doc.contains("flows")) {
            for (const auto& f : doc.at("flows")) {
                c.flows.push_back({f.at("movement").get<std::string>(), f.at("rate").get<double>()});
            }
        }
        if (doc.contains("sim")) {
            const auto& sim = doc.at("sim");
            c.duration_ms = seconds_to_ms(sim.value("duration_s", ms_to_seconds(c.duration_ms)));
            c.dt_ms = seconds_to_ms(sim.value("dt_s", ms_to_seconds(c.dt_ms)));
            c.timing.delta_time_ms = seconds_to_ms(sim.value("delta_time_s", ms_to_seconds(c.timing.delta_time_ms)));
            c.timing.min_green_ms = seconds_to_ms(sim.value("min_green_s", ms_to_seconds(c.timing.min_green_ms)));
            c.timing.yellow_ms = seconds_to_ms(sim.value("yellow_s", ms_to_seconds(c.timing.yellow_ms)));
            c.seed = sim.value("seed", c.seed);
            c.gamma = sim.value("gamma", c.gamma);
            c.waiting_window_ms =
                seconds_to_ms(sim.value("waiting_window_s", ms_to_seconds(c.waiting_window_ms)));
            if (sim.contains("obs")) {
                const auto kind = parse_obs_kind(sim.at("obs").get<std::string>());
                if (!kind) throw Error(ErrorCode::parse_error, "unknown observation kind");
                c.obs_kind = *kind;
            }
        }
        if (doc.contains("emission")) {
            c.emission = load_emission_coeffs(doc.at("emission").dump());
        }
        if (doc.contains("controller")) {
            const auto& ctl = doc.at("controller");
            s.controller.kind = ctl.value("kind", s.controller.kind);
            if (ctl.contains("sotl")) {
                const auto& p = ctl.at("sotl");
                s.controller.sotl.theta = p.value("theta", s.controller.sotl.theta);
                s.controller.sotl.mu = p.value("mu", s.controller.sotl.mu);
                s.controller.sotl.omega = p.value("omega", s.controller.sotl.omega);
            }
            if (ctl.contains("fixed")) {
                for (const auto& slot : ctl.at("fixed").at("plan")) {
                    s.controller.plan.push_back({slot.at(0).get<int>(), seconds_to_ms(slot.at(1).get<double>())});
                }
            }
        }
    });
    s.config.validate();
    s.network = std::make_shared<const NetworkSpec>(guarded([&] { return parse_network(doc); }),
                                                    s.config.dynamics.pitch());
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::parse_error, "cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

std::string serialize_network(const NetworkSpec& network) { return network_json(network).dump(2) + "\n"; }

std::string serialize_scenario(const Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc.update(network_json(*s.network));
    const auto& c = s.config;
    json flows = json::array();
    for (const auto& f : c.flows) flows.push_back({{"movement", f.movement}, {"rate", f.rate}});
    doc["flows"] = std::move(flows);
    doc["sim"] = {{"duration_s", ms_to_seconds(c.duration_ms)},
                  {"dt_s", ms_to_seconds(c.dt_ms)},
                  {"delta_time_s", ms_to_seconds(c.timing.delta_time_ms)},
                  {"min_green_s", ms_to_seconds(c.timing.min_green_ms)},
                  {"yellow_s", ms_to_seconds(c.timing.yellow_ms)},
                  {"seed", c.seed},
                  {"gamma", c.gamma},
                  {"waiting_window_s", ms_to_seconds(c.waiting_window_ms)},
                  {"obs", obs_kind_name(c.obs_kind)}};
    doc["dynamics"] = {{"accel_max", c.dynamics.accel_max},   {"decel_max", c.dynamics.decel_max},
                       {"vehicle_length", c.dynamics.vehicle_length}, {"min_gap", c.dynamics.min_gap},
                       {"tau", c.dynamics.tau},               {"sigma", c.dynamics.sigma},
                       {"halt_threshold", c.dynamics.halt_threshold}};
    json emission;
    for (std::size_t i = 0; i < c.emission.c.size(); ++i) emission["c" + std::to_string(i)] = c.emission.c[i];
    doc["emission"] = std::move(emission);
    json ctl = {{"kind", s.controller.kind},
                {"sotl", {{"theta", s.controller.sotl.theta}, {"mu", s.controller.sotl.mu}, {"omega", s.controller.sotl.omega}}}};
    if (!s.controller.plan.empty()) {
        json plan = json::array();
        for (const auto& slot : s.controller.plan) plan.push_back({slot.phase, ms_to_seconds(slot.green_ms)});
        ctl["fixed"] = {{"plan", std::move(plan)}};
    }
    doc["controller"] = std::move(ctl);
    return doc.dump(2) + "\n";
}

namespace {

struct ApproachDemand {
    double through = 0.0;  // veh/h
    double left = 0.0;
};

// Four approaches (N, E, S, W), two incoming lanes each: kerb lane through, median lane left.
Scenario four_leg_intersection(std::string name, const std::array<ApproachDemand, 4>& demand) {
    constexpr double kIncoming = 250.0;
    constexpr double kOutgoing = 100.0;
    constexpr double kSpeed = 13.89;
    const std::array<std::string, 4> ids{"N", "E", "S", "W"};
    // Index of the approach a vehicle reaches going straight / turning left.
    const std::array<int, 4> opposite{2, 3, 0, 1};
    const std::array<int, 4> left_of{1, 2, 3, 0};  // southbound from N turns left into E

    NetworkDescription d;
    for (int a = 0; a < 4; ++a) {
        const auto& id = ids[static_cast<std::size_t>(a)];
        Approach ap;
        ap.id = id;
        ap.heading_deg = 90.0 * a;
        ap.incoming_lanes = {{id + "_in_0", kIncoming, kSpeed}, {id + "_in_1", kIncoming, kSpeed}};
        ap.outgoing_lanes = {{id + "_out_0", kOutgoing, kSpeed}, {id + "_out_1", kOutgoing, kSpeed}};
        d.approaches.push_back(std::move(ap));
    }
    for (int a = 0; a < 4; ++a) {
        const auto& id = ids[static_cast<std::size_t>(a)];
        d.movements.push_back({id + "_T", id + "_in_0", ids[static_cast<std::size_t>(opposite[a])] + "_out_0",
                               Turn::through});
        d.movements.push_back({id + "_L", id + "_in_1", ids[static_cast<std::size_t>(left_of[a])] + "_out_1",
                               Turn::left});
    }
    d.green_phases = {{0, {"N_T", "S_T"}}, {1, {"N_L", "S_L"}}, {2, {"E_T", "W_T"}}, {3, {"E_L", "W_L"}}};

    Scenario s;
    s.name = std::move(name);
    s.config.gamma = 0.9;
    for (int a = 0; a < 4; ++a) {
        const auto& id = ids[static_cast<std::size_t>(a)];
        s.config.flows.push_back({id + "_T", demand[static_cast<std::size_t>(a)].through});
        s.config.flows.push_back({id + "_L", demand[static_cast<std::size_t>(a)].left});
    }
    s.network = std::make_shared<const NetworkSpec>(std::move(d), s.config.dynamics.pitch());
    s.controller.kind = "fixed";
    return s;
}

}  // namespace

Scenario builtin_scenario(std::string_view name) {
    if (name == "single-intersection") {
        return four_leg_intersection("single-intersection",
                                     {{{975.0, 10.0}, {975.0, 10.0}, {975.0, 10.0}, {975.0, 10.0}}});
    }
    if (name == "asym-intersection") {
        return four_leg_intersection("asym-intersection",
                                     {{{900.0, 60.0}, {360.0, 30.0}, {780.0, 45.0}, {240.0, 20.0}}});
    }
    throw Error(ErrorCode::unknown_scenario, "unknown scenario '" + std::string(name) + "'");
}

Scenario resolve_scenario(std::string_view name_or_path) {
    if (name_or_path == "single-intersection" || name_or_path == "asym-intersection") {
        return builtin_scenario(name_or_path);
    }
    if (name_or_path.find('/') == std::string_view::npos && name_or_path.find('.') == std::string_view::npos) {
        throw Error(ErrorCode::unknown_scenario, "unknown scenario '" + std::string(name_or_path) + "'");
    }
    return load_scenario_file(std::string(name_or_path));
}

}  // namespace signal_dojo
