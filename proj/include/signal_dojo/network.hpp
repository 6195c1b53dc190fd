#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace signal_dojo {

enum class Turn { through, left, right };

const char* turn_name(Turn turn) noexcept;
std::optional<Turn> parse_turn(std::string_view token) noexcept;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct Lane {
    std::string id;
    double length = 0.0;       // m
    double speed_limit = 0.0;  // m/s

    friend bool operator==(const Lane&, const Lane&) = default;
};

struct Approach {
    std::string id;
    // Compass bearing (degrees) from the junction centre towards the approach: N = 0, E = 90.
    double heading_deg = 0.0;
    std::vector<Lane> incoming_lanes;  // index 0 is the kerb-side lane
    std::vector<Lane> outgoing_lanes;

    friend bool operator==(const Approach&, const Approach&) = default;
};

struct Movement {
    std::string id;
    std::string from_lane;
    std::string to_lane;
    Turn turn = Turn::through;

    friend bool operator==(const Movement&, const Movement&) = default;
};

struct Phase {
    int index = 0;
    std::vector<std::string> movements;

    friend bool operator==(const Phase&, const Phase&) = default;
};

using MovementPair = std::pair<std::string, std::string>;

/// Unvalidated network data as written in a scenario document.
struct NetworkDescription {
    std::vector<Approach> approaches;
    std::vector<Movement> movements;
    std::vector<Phase> green_phases;
    std::vector<MovementPair> declared_conflicts;
    double junction_extent = 20.0;  // half-width of the junction box, m

    friend bool operator==(const NetworkDescription&, const NetworkDescription&) = default;
};

enum class LaneKind { incoming, outgoing };

struct LaneInfo {
    std::string id;
    LaneKind kind = LaneKind::incoming;
    int approach = 0;
    int slot = 0;  // position within the approach's lane list
    double length = 0.0;
    double speed_limit = 0.0;
    int capacity = 0;
    Point start;  // upstream end
    Point end;    // downstream end; the stop line for incoming lanes
    std::vector<int> movements;  // movements leaving (incoming) or entering (outgoing) this lane
};

struct MovementInfo {
    std::string id;
    int from_lane = 0;
    int to_lane = 0;
    Turn turn = Turn::through;
    double link_length = 0.0;  // junction traversal distance, m
    Point chord_start;
    Point chord_end;
    std::vector<int> phases;
};

/// Validated, immutable network. Safe to share read-only between simulations.
class NetworkSpec {
public:
    static constexpr double kLaneWidth = 3.2;

    /// Throws Error(dangling_reference | conflicting_phase | empty_phase | config_error).
    /// `vehicle_pitch` is vehicle_length + min_gap and sets lane capacities.
    explicit NetworkSpec(NetworkDescription description, double vehicle_pitch = 7.5);

    const NetworkDescription& description() const noexcept { return description_; }
    double junction_extent() const noexcept { return description_.junction_extent; }
    double vehicle_pitch() const noexcept { return vehicle_pitch_; }

    const std::vector<LaneInfo>& lanes() const noexcept { return lanes_; }
    const std::vector<MovementInfo>& movements() const noexcept { return movements_; }
    /// Movement indices per green phase.
    const std::vector<std::vector<int>>& phases() const noexcept { return phases_; }
    std::size_t phase_count() const noexcept { return phases_.size(); }
    std::size_t approach_count() const noexcept { return description_.approaches.size(); }

    /// Incoming lanes in the fixed observation order (approach order, then kerb to median).
    const std::vector<int>& incoming_lanes() const noexcept { return incoming_; }
    const std::vector<int>& outgoing_lanes() const noexcept { return outgoing_; }

    std::optional<int> lane_index(std::string_view id) const;
    std::optional<int> movement_index(std::string_view id) const;
    const LaneInfo& lane(int index) const { return lanes_.at(static_cast<std::size_t>(index)); }
    const MovementInfo& movement(int index) const {
        return movements_.at(static_cast<std::size_t>(index));
    }

    bool conflicting(int a, int b) const {
        return conflicts_[static_cast<std::size_t>(a) * movements_.size() + static_cast<std::size_t>(b)];
    }
    bool phase_contains(int phase, int movement) const;

    /// Unit vector from the junction centre towards approach `index`.
    Point approach_direction(int index) const;
    double max_incoming_length() const;
    double max_speed_limit() const;

    friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
        return a.description_ == b.description_;
    }

private:
    NetworkDescription description_;
    double vehicle_pitch_;
    std::vector<LaneInfo> lanes_;
    std::vector<MovementInfo> movements_;
    std::vector<std::vector<int>> phases_;
    std::vector<int> incoming_;
    std::vector<int> outgoing_;
    std::vector<bool> conflicts_;
    std::map<std::string, int, std::less<>> lane_by_id_;
    std::map<std::string, int, std::less<>> movement_by_id_;
};

/// Pairs of movement ids that may never be green together: chords that cross inside
/// the junction box, chords sharing a destination lane, and declared pairs.
/// Each pair is stored once with the lexicographically smaller id first.
std::set<MovementPair> conflict_table(const NetworkSpec& spec);

/// Proper crossing test for two straight segments; touching endpoints do not count.
bool segments_cross(Point a0, Point a1, Point b0, Point b1);

}  // namespace signal_dojo
