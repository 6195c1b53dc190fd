#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "signal_dojo/env.hpp"
#include "signal_dojo/network.hpp"

namespace signal_dojo {

struct Scenario {
    std::string name;
    std::shared_ptr<const NetworkSpec> network;
    ScenarioConfig config;
    ControllerConfig controller;
};

/// Parses the network sections (lanes, movements, phases, conflicts) of a scenario
/// document. Throws Error(parse_error | dangling_reference | conflicting_phase | empty_phase).
NetworkSpec load_network(std::string_view text, double vehicle_pitch = 7.5);

/// Parses a full scenario document including flows, sim and controller sections.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::string& path);

std::string serialize_network(const NetworkSpec& network);
std::string serialize_scenario(const Scenario& scenario);

/// "single-intersection" or "asym-intersection". Throws Error(unknown_scenario).
Scenario builtin_scenario(std::string_view name);

/// Built-in name, or a path to a scenario document.
Scenario resolve_scenario(std::string_view name_or_path);

}  // namespace signal_dojo
