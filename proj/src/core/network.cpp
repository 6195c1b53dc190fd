#include "signal_dojo/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "signal_dojo/error.hpp"

namespace signal_dojo {

const char* turn_name(Turn turn) noexcept {
    switch (turn) {
    case Turn::through: return "through";
    case Turn::left: return "left";
    case Turn::right: return "right";
    }
    return "through";
}

std::optional<Turn> parse_turn(std::string_view token) noexcept {
    if (token == "through") return Turn::through;
    if (token == "left") return Turn::left;
    if (token == "right") return Turn::right;
    return std::nullopt;
}

namespace {

Point add(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point scale(Point a, double s) { return {a.x * s, a.y * s}; }

double cross(Point o, Point a, Point b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Point heading_vector(double heading_deg) {
    const double rad = heading_deg * std::numbers::pi / 180.0;
    // Snap near-zero components so cardinal headings give exact axes.
    auto snap = [](double v) { return std::abs(v) < 1e-12 ? 0.0 : v; };
    return {snap(std::sin(rad)), snap(std::cos(rad))};
}

}  // namespace

bool segments_cross(Point a0, Point a1, Point b0, Point b1) {
    constexpr double eps = 1e-9;
    const double d1 = cross(b0, b1, a0);
    const double d2 = cross(b0, b1, a1);
    const double d3 = cross(a0, a1, b0);
    const double d4 = cross(a0, a1, b1);
    return ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) &&
           ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps));
}

NetworkSpec::NetworkSpec(NetworkDescription description, double vehicle_pitch)
    : description_(std::move(description)), vehicle_pitch_(vehicle_pitch) {
    const auto& d = description_;
    if (!(d.junction_extent > 0.0)) {
        throw Error(ErrorCode::config_error, "junction_extent must be positive");
    }
    if (!(vehicle_pitch_ > 0.0)) {
        throw Error(ErrorCode::config_error, "vehicle pitch must be positive");
    }
    if (d.approaches.empty()) {
        throw Error(ErrorCode::config_error, "network has no approaches");
    }

    // Lanes: incoming lanes of every approach first, then outgoing lanes.
    auto add_lane = [&](const Lane& lane, LaneKind kind, int approach, int slot, int count) {
        if (lane.id.empty()) throw Error(ErrorCode::config_error, "lane with empty id");
        if (!(lane.length > 0.0)) {
            throw Error(ErrorCode::config_error, "lane '" + lane.id + "' must have positive length");
        }
        if (!(lane.speed_limit > 0.0)) {
            throw Error(ErrorCode::config_error, "lane '" + lane.id + "' must have positive speed limit");
        }
        const int capacity = static_cast<int>(std::floor(lane.length / vehicle_pitch_));
        if (capacity < 1) {
            throw Error(ErrorCode::config_error, "lane '" + lane.id + "' is too short to hold a vehicle");
        }
        if (!lane_by_id_.emplace(lane.id, static_cast<int>(lanes_.size())).second) {
            throw Error(ErrorCode::config_error, "duplicate lane id '" + lane.id + "'");
        }
        const Point out = approach_direction(approach);
        const double lateral = (count - slot - 0.5) * kLaneWidth;
        const double e = d.junction_extent;
        LaneInfo info;
        info.id = lane.id;
        info.kind = kind;
        info.approach = approach;
        info.slot = slot;
        info.length = lane.length;
        info.speed_limit = lane.speed_limit;
        info.capacity = capacity;
        if (kind == LaneKind::incoming) {
            const Point right{-out.y, out.x};  // right-hand side of inbound travel
            info.start = add(scale(out, e + lane.length), scale(right, lateral));
            info.end = add(scale(out, e), scale(right, lateral));
            incoming_.push_back(static_cast<int>(lanes_.size()));
        } else {
            const Point right{out.y, -out.x};  // right-hand side of outbound travel
            info.start = add(scale(out, e), scale(right, lateral));
            info.end = add(scale(out, e + lane.length), scale(right, lateral));
            outgoing_.push_back(static_cast<int>(lanes_.size()));
        }
        lanes_.push_back(std::move(info));
    };

    std::set<std::string> approach_ids;
    for (std::size_t a = 0; a < d.approaches.size(); ++a) {
        const auto& approach = d.approaches[a];
        if (!approach_ids.insert(approach.id).second) {
            throw Error(ErrorCode::config_error, "duplicate approach id '" + approach.id + "'");
        }
        const int n = static_cast<int>(approach.incoming_lanes.size());
        for (int k = 0; k < n; ++k) {
            add_lane(approach.incoming_lanes[static_cast<std::size_t>(k)], LaneKind::incoming,
                     static_cast<int>(a), k, n);
        }
    }
    for (std::size_t a = 0; a < d.approaches.size(); ++a) {
        const auto& approach = d.approaches[a];
        const int n = static_cast<int>(approach.outgoing_lanes.size());
        for (int k = 0; k < n; ++k) {
            add_lane(approach.outgoing_lanes[static_cast<std::size_t>(k)], LaneKind::outgoing,
                     static_cast<int>(a), k, n);
        }
    }

    for (const auto& m : d.movements) {
        const auto from = lane_index(m.from_lane);
        const auto to = lane_index(m.to_lane);
        if (!from) {
            throw Error(ErrorCode::dangling_reference,
                        "movement '" + m.id + "' references unknown lane '" + m.from_lane + "'");
        }
        if (!to) {
            throw Error(ErrorCode::dangling_reference,
                        "movement '" + m.id + "' references unknown lane '" + m.to_lane + "'");
        }
        if (lanes_[static_cast<std::size_t>(*from)].kind != LaneKind::incoming) {
            throw Error(ErrorCode::config_error,
                        "movement '" + m.id + "' must start on an incoming lane");
        }
        if (lanes_[static_cast<std::size_t>(*to)].kind != LaneKind::outgoing) {
            throw Error(ErrorCode::config_error,
                        "movement '" + m.id + "' must end on an outgoing lane");
        }
        if (!movement_by_id_.emplace(m.id, static_cast<int>(movements_.size())).second) {
            throw Error(ErrorCode::config_error, "duplicate movement id '" + m.id + "'");
        }
        MovementInfo info;
        info.id = m.id;
        info.from_lane = *from;
        info.to_lane = *to;
        info.turn = m.turn;
        info.link_length = 2.0 * d.junction_extent;
        info.chord_start = lanes_[static_cast<std::size_t>(*from)].end;
        info.chord_end = lanes_[static_cast<std::size_t>(*to)].start;
        lanes_[static_cast<std::size_t>(*from)].movements.push_back(static_cast<int>(movements_.size()));
        lanes_[static_cast<std::size_t>(*to)].movements.push_back(static_cast<int>(movements_.size()));
        movements_.push_back(std::move(info));
    }

    const std::size_t nm = movements_.size();
    conflicts_.assign(nm * nm, false);
    auto mark = [&](std::size_t a, std::size_t b) {
        conflicts_[a * nm + b] = true;
        conflicts_[b * nm + a] = true;
    };
    for (std::size_t a = 0; a < nm; ++a) {
        for (std::size_t b = a + 1; b < nm; ++b) {
            const auto& ma = movements_[a];
            const auto& mb = movements_[b];
            if (ma.to_lane == mb.to_lane ||
                segments_cross(ma.chord_start, ma.chord_end, mb.chord_start, mb.chord_end)) {
                mark(a, b);
            }
        }
    }
    for (const auto& [x, y] : d.declared_conflicts) {
        const auto a = movement_index(x);
        const auto b = movement_index(y);
        if (!a || !b) {
            throw Error(ErrorCode::dangling_reference,
                        "conflict pair references unknown movement '" + (a ? y : x) + "'");
        }
        if (*a == *b) {
            throw Error(ErrorCode::config_error, "movement '" + x + "' declared in conflict with itself");
        }
        mark(static_cast<std::size_t>(*a), static_cast<std::size_t>(*b));
    }

    if (d.green_phases.size() < 2) {
        throw Error(ErrorCode::config_error, "at least two green phases are required");
    }
    for (std::size_t p = 0; p < d.green_phases.size(); ++p) {
        const auto& phase = d.green_phases[p];
        if (phase.index != static_cast<int>(p)) {
            throw Error(ErrorCode::config_error, "phase indices must be dense from 0");
        }
        if (phase.movements.empty()) {
            throw Error(ErrorCode::empty_phase, "phase " + std::to_string(p) + " has no movements");
        }
        std::vector<int> members;
        for (const auto& id : phase.movements) {
            const auto m = movement_index(id);
            if (!m) {
                throw Error(ErrorCode::dangling_reference,
                            "phase " + std::to_string(p) + " references unknown movement '" + id + "'");
            }
            if (std::find(members.begin(), members.end(), *m) != members.end()) {
                throw Error(ErrorCode::config_error,
                            "phase " + std::to_string(p) + " lists movement '" + id + "' twice");
            }
            for (int other : members) {
                if (conflicting(*m, other)) {
                    throw Error(ErrorCode::conflicting_phase,
                                "phase " + std::to_string(p) + " contains conflicting movements '" +
                                    movements_[static_cast<std::size_t>(other)].id + "' and '" + id + "'");
                }
            }
            members.push_back(*m);
            movements_[static_cast<std::size_t>(*m)].phases.push_back(static_cast<int>(p));
        }
        phases_.push_back(std::move(members));
    }
    for (const auto& m : movements_) {
        if (m.phases.empty()) {
            throw Error(ErrorCode::config_error, "movement '" + m.id + "' is not served by any phase");
        }
    }
}

std::optional<int> NetworkSpec::lane_index(std::string_view id) const {
    const auto it = lane_by_id_.find(id);
    if (it == lane_by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> NetworkSpec::movement_index(std::string_view id) const {
    const auto it = movement_by_id_.find(id);
    if (it == movement_by_id_.end()) return std::nullopt;
    return it->second;
}

bool NetworkSpec::phase_contains(int phase, int movement) const {
    const auto& members = phases_.at(static_cast<std::size_t>(phase));
    return std::find(members.begin(), members.end(), movement) != members.end();
}

Point NetworkSpec::approach_direction(int index) const {
    return heading_vector(description_.approaches.at(static_cast<std::size_t>(index)).heading_deg);
}

double NetworkSpec::max_incoming_length() const {
    double best = 0.0;
    for (int l : incoming_) best = std::max(best, lanes_[static_cast<std::size_t>(l)].length);
    return best;
}

double NetworkSpec::max_speed_limit() const {
    double best = 0.0;
    for (const auto& l : lanes_) best = std::max(best, l.speed_limit);
    return best;
}

std::set<MovementPair> conflict_table(const NetworkSpec& spec) {
    std::set<MovementPair> out;
    const auto& ms = spec.movements();
    for (std::size_t a = 0; a < ms.size(); ++a) {
        for (std::size_t b = a + 1; b < ms.size(); ++b) {
            if (spec.conflicting(static_cast<int>(a), static_cast<int>(b))) {
                auto x = ms[a].id;
                auto y = ms[b].id;
                if (y < x) std::swap(x, y);
                out.emplace(std::move(x), std::move(y));
            }
        }
    }
    return out;
}

}  // namespace signal_dojo
