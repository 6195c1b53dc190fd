#include "signal_dojo/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "signal_dojo/error.hpp"

namespace signal_dojo {

namespace {

constexpr double kFreeGap = 1e9;

class Fnv1a {
public:
    void add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            hash_ ^= (v >> (8 * i)) & 0xffu;
            hash_ *= 0x100000001b3ull;
        }
    }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

}  // namespace

const char* stage_name(Stage stage) noexcept {
    switch (stage) {
    case Stage::approaching: return "approaching";
    case Stage::crossing: return "crossing";
    case Stage::departing: return "departing";
    case Stage::done: return "done";
    }
    return "approaching";
}

void DynamicsParams::validate() const {
    if (!(accel_max > 0 && decel_max > 0 && vehicle_length > 0 && vehicle_width > 0 && min_gap > 0 &&
          tau > 0 && halt_threshold > 0)) {
        throw Error(ErrorCode::config_error, "dynamics parameters must be positive");
    }
    if (!(sigma >= 0.0 && sigma <= 1.0)) {
        throw Error(ErrorCode::config_error, "sigma must lie in [0, 1]");
    }
}

void WaitingWindow::push(bool halted) {
    if (ring_.empty()) return;
    halted_ -= ring_[head_];
    ring_[head_] = halted ? 1 : 0;
    halted_ += ring_[head_];
    head_ = (head_ + 1) % ring_.size();
}

double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double car_following_update(double speed, double speed_limit, double gap, double leader_speed,
                            const DynamicsParams& params, double dt, double u) {
    gap = std::max(gap, 0.0);
    leader_speed = std::max(leader_speed, 0.0);
    const double b = params.decel_max;
    const double bt = b * params.tau;
    const double v_safe = -bt + std::sqrt(bt * bt + leader_speed * leader_speed + 2.0 * b * gap);
    const double v_des = std::min({speed + params.accel_max * dt, speed_limit, v_safe});
    return std::max(0.0, v_des - params.sigma * params.accel_max * dt * u);
}

World::World(std::shared_ptr<const NetworkSpec> network, DynamicsParams params,
             std::vector<FlowSpec> flows, std::int64_t dt_ms, std::int64_t window_ms)
    : network_(std::move(network)), params_(params), flows_(std::move(flows)), dt_ms_(dt_ms) {
    params_.validate();
    if (dt_ms_ <= 0) throw Error(ErrorCode::config_error, "dt must be positive");
    if (window_ms < 0) throw Error(ErrorCode::config_error, "waiting window must be nonnegative");
    window_steps_ = static_cast<std::size_t>(window_ms / dt_ms_);
    for (const auto& f : flows_) {
        const auto m = network_->movement_index(f.movement);
        if (!m) {
            throw Error(ErrorCode::dangling_reference, "flow references unknown movement '" + f.movement + "'");
        }
        if (!(f.rate >= 0.0)) throw Error(ErrorCode::config_error, "flow rate must be nonnegative");
        flow_movement_.push_back(*m);
    }
    lanes_.resize(network_->lanes().size());
    links_.resize(network_->movements().size());
    planned_lanes_.resize(lanes_.size());
    planned_links_.resize(links_.size());
    pending_.assign(flows_.size(), 0);
    reset(0);
}

void World::reset(std::uint64_t seed) {
    for (auto& q : lanes_) q.clear();
    for (auto& q : links_) q.clear();
    std::fill(pending_.begin(), pending_.end(), 0);
    completions_.clear();
    now_ms_ = 0;
    next_id_ = 0;
    spawned_ = 0;
    completed_ = 0;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5157u};
    rng_.seed(seq);
}

std::vector<std::uint64_t> World::spawn_step() {
    const double dt = static_cast<double>(dt_ms_) / 1000.0;
    std::vector<std::uint64_t> inserted;
    for (std::size_t f = 0; f < flows_.size(); ++f) {
        const double p = flows_[f].rate * dt / 3600.0;
        if (p > 1.0) {
            throw Error(ErrorCode::rate_too_high,
                        "flow on '" + flows_[f].movement + "' needs more than one vehicle per step");
        }
        if (uniform01(rng_) < p) {
            ++pending_[f];
            ++spawned_;
        }
        if (pending_[f] == 0) continue;
        const int movement = flow_movement_[f];
        auto& lane = lanes_[static_cast<std::size_t>(network_->movement(movement).from_lane)];
        const bool free = lane.empty() || lane.back().position - params_.vehicle_length >= params_.pitch();
        if (!free) continue;
        VehicleState v;
        v.id = next_id_++;
        v.movement = movement;
        v.stage = Stage::approaching;
        v.position = params_.vehicle_length;
        v.depart_ms = now_ms_;
        v.window = WaitingWindow(window_steps_);
        lane.push_back(std::move(v));
        --pending_[f];
        inserted.push_back(lane.back().id);
    }
    return inserted;
}

bool World::conflicting_vehicle_inside(int movement) const {
    for (std::size_t c = 0; c < links_.size(); ++c) {
        if (!links_[c].empty() && network_->conflicting(movement, static_cast<int>(c))) return true;
    }
    return false;
}

double World::limit_speed(const VehicleState& ego, double speed_limit, double gap, double leader_speed) {
    const double dt = static_cast<double>(dt_ms_) / 1000.0;
    const double u = params_.sigma > 0.0 ? uniform01(rng_) : 0.0;
    return car_following_update(ego.speed, speed_limit, gap, leader_speed, params_, dt, u);
}

void World::insert_sorted(Queue& queue, VehicleState vehicle) {
    auto it = std::find_if(queue.begin(), queue.end(),
                           [&](const VehicleState& v) { return v.position < vehicle.position; });
    queue.insert(it, std::move(vehicle));
}

void World::advance(std::span<const Aspect> movement_aspects) {
    const auto& net = *network_;
    if (movement_aspects.size() != net.movements().size()) {
        throw Error(ErrorCode::invalid_argument, "aspect vector does not match movement count");
    }
    const double dt = static_cast<double>(dt_ms_) / 1000.0;
    const double len = params_.vehicle_length;
    const double min_gap = params_.min_gap;
    const std::int64_t t_next = now_ms_ + dt_ms_;
    completions_.clear();

    // Bound on a vehicle's front position: the leader's rear less min_gap, or a stop line.
    struct Limit {
        double position;
        double leader_speed;
    };
    auto free_road = [&](const VehicleState& v, double v_max) { return Limit{v.position + kFreeGap, v_max}; };
    auto behind = [&](const VehicleState& leader, double offset) {
        return Limit{offset + leader.position - len - min_gap, leader.speed};
    };

    // Leader bound for the first vehicle of a link or of an incoming lane, in that
    // segment's coordinates.
    auto link_front_limit = [&](int m, const VehicleState& v, double v_max) {
        const auto& mv = net.movement(m);
        const auto& out_q = lanes_[static_cast<std::size_t>(mv.to_lane)];
        return out_q.empty() ? free_road(v, v_max) : behind(out_q.back(), mv.link_length);
    };
    auto lane_front_limit = [&](const VehicleState& v, double line, double v_max) {
        const auto& link = links_[static_cast<std::size_t>(v.movement)];
        if (!link.empty()) return behind(link.back(), line);
        const auto limit = link_front_limit(v.movement, v, v_max);
        return limit.position >= v.position + kFreeGap ? limit
                                                        : Limit{limit.position + line, limit.leader_speed};
    };
    // Incoming-lane vehicles that must hold at the stop line this step.
    auto must_stop = [&](const VehicleState& v, double line) {
        if (v.position > line) return false;
        const Aspect a = movement_aspects[static_cast<std::size_t>(v.movement)];
        if (a == Aspect::red) return true;
        if (a == Aspect::yellow && v.speed * v.speed / (2.0 * params_.decel_max) <= line - v.position) return true;
        return conflicting_vehicle_inside(v.movement);
    };

    // Pass 1: every speed decision reads start-of-step states only.
    auto plan_segment = [&](Queue& q, std::vector<double>& planned, double v_max, auto&& front_limit,
                            auto&& line_of) {
        planned.resize(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            Limit limit = i == 0 ? front_limit(q[i]) : behind(q[i - 1], 0.0);
            if (const double line = line_of(q[i]); line >= 0.0 && line < limit.position && must_stop(q[i], line)) {
                limit = {line, 0.0};
            }
            planned[i] = limit_speed(q[i], v_max, limit.position - q[i].position, limit.leader_speed);
        }
    };
    auto no_line = [](const VehicleState&) { return -1.0; };

    for (int l : net.outgoing_lanes()) {
        const double v_max = net.lane(l).speed_limit;
        plan_segment(lanes_[static_cast<std::size_t>(l)], planned_lanes_[static_cast<std::size_t>(l)], v_max,
                     [&](const VehicleState& v) { return free_road(v, v_max); }, no_line);
    }
    for (std::size_t m = 0; m < links_.size(); ++m) {
        const auto& mv = net.movement(static_cast<int>(m));
        const double v_max = std::min(net.lane(mv.from_lane).speed_limit, net.lane(mv.to_lane).speed_limit);
        plan_segment(links_[m], planned_links_[m], v_max,
                     [&](const VehicleState& v) { return link_front_limit(static_cast<int>(m), v, v_max); },
                     no_line);
    }
    for (int l : net.incoming_lanes()) {
        const auto& info = net.lane(l);
        plan_segment(lanes_[static_cast<std::size_t>(l)], planned_lanes_[static_cast<std::size_t>(l)],
                     info.speed_limit,
                     [&](const VehicleState& v) { return lane_front_limit(v, info.length, info.speed_limit); },
                     [&](const VehicleState&) { return info.length; });
    }

    // Pass 2: move downstream first; positions are capped by the leader's new rear
    // and, for held vehicles, by the stop line.
    auto move_segment = [&](Queue& q, const std::vector<double>& planned, auto&& front_cap, double line) {
        for (std::size_t i = 0; i < q.size(); ++i) {
            auto& v = q[i];
            double cap = i == 0 ? front_cap(v) : q[i - 1].position - len - min_gap;
            if (line >= 0.0 && must_stop(v, line)) cap = std::min(cap, line);
            double speed = planned[i];
            double next = v.position + speed * dt;
            if (next > cap) {
                next = std::max(cap, v.position);
                speed = (next - v.position) / dt;
            }
            v.accel = (speed - v.speed) / dt;
            v.speed = speed;
            v.position = next;
        }
    };
    auto uncapped = [](const VehicleState&) { return std::numeric_limits<double>::infinity(); };

    for (int l : net.outgoing_lanes()) {
        move_segment(lanes_[static_cast<std::size_t>(l)], planned_lanes_[static_cast<std::size_t>(l)], uncapped, -1.0);
    }
    for (std::size_t m = 0; m < links_.size(); ++m) {
        const auto& mv = net.movement(static_cast<int>(m));
        const auto& out_q = lanes_[static_cast<std::size_t>(mv.to_lane)];
        move_segment(links_[m], planned_links_[m],
                     [&](const VehicleState&) {
                         return out_q.empty() ? std::numeric_limits<double>::infinity()
                                              : mv.link_length + out_q.back().position - len - min_gap;
                     },
                     -1.0);
    }
    for (int l : net.incoming_lanes()) {
        const double line = net.lane(l).length;
        move_segment(lanes_[static_cast<std::size_t>(l)], planned_lanes_[static_cast<std::size_t>(l)],
                     [&](const VehicleState& v) {
                         const auto& mv = net.movement(v.movement);
                         const auto& link = links_[static_cast<std::size_t>(v.movement)];
                         if (!link.empty()) return line + link.back().position - len - min_gap;
                         const auto& out_q = lanes_[static_cast<std::size_t>(mv.to_lane)];
                         if (!out_q.empty()) return line + mv.link_length + out_q.back().position - len - min_gap;
                         return std::numeric_limits<double>::infinity();
                     },
                     line);
        for (auto& v : lanes_[static_cast<std::size_t>(l)]) {
            const bool halted = v.speed < params_.halt_threshold;
            if (halted) v.waiting_ms += dt_ms_;
            v.window.push(halted);
        }
    }

    // Transfers between segments, downstream first so every queue stays ordered.
    for (int l : net.outgoing_lanes()) {
        auto& q = lanes_[static_cast<std::size_t>(l)];
        const double end = net.lane(l).length;
        while (!q.empty() && q.front().position >= end) {
            auto& v = q.front();
            v.stage = Stage::done;
            v.arrive_ms = t_next;
            completions_.push_back({v.id, v.movement, v.depart_ms, t_next});
            ++completed_;
            q.pop_front();
        }
    }
    for (std::size_t m = 0; m < links_.size(); ++m) {
        auto& q = links_[m];
        const auto& mv = net.movement(static_cast<int>(m));
        while (!q.empty() && q.front().position >= mv.link_length) {
            VehicleState v = std::move(q.front());
            q.pop_front();
            v.position -= mv.link_length;
            v.stage = Stage::departing;
            insert_sorted(lanes_[static_cast<std::size_t>(mv.to_lane)], std::move(v));
        }
    }
    for (int l : net.incoming_lanes()) {
        auto& q = lanes_[static_cast<std::size_t>(l)];
        const double line = net.lane(l).length;
        while (!q.empty() && q.front().position > line) {
            VehicleState v = std::move(q.front());
            q.pop_front();
            v.position -= line;
            v.stage = Stage::crossing;
            insert_sorted(links_[static_cast<std::size_t>(v.movement)], std::move(v));
        }
    }

    now_ms_ = t_next;
}

const std::deque<VehicleState>& World::lane_vehicles(int lane) const {
    if (lane < 0 || static_cast<std::size_t>(lane) >= lanes_.size()) {
        throw Error(ErrorCode::unknown_lane, "lane index " + std::to_string(lane));
    }
    return lanes_[static_cast<std::size_t>(lane)];
}

const std::deque<VehicleState>& World::link_vehicles(int movement) const {
    if (movement < 0 || static_cast<std::size_t>(movement) >= links_.size()) {
        throw Error(ErrorCode::unknown_movement, "movement index " + std::to_string(movement));
    }
    return links_[static_cast<std::size_t>(movement)];
}

int World::queue_count(int lane) const {
    const auto& q = lane_vehicles(lane);
    return static_cast<int>(std::count_if(q.begin(), q.end(), [&](const VehicleState& v) {
        return v.speed < params_.halt_threshold;
    }));
}

int World::queue_count(std::string_view lane_id) const {
    const auto l = network_->lane_index(lane_id);
    if (!l) throw Error(ErrorCode::unknown_lane, "unknown lane '" + std::string(lane_id) + "'");
    return queue_count(*l);
}

double World::lane_density(int lane) const {
    const auto& q = lane_vehicles(lane);
    const double cap = network_->lane(lane).capacity;
    return std::clamp(static_cast<double>(q.size()) / cap, 0.0, 1.0);
}

double World::lane_density(std::string_view lane_id) const {
    const auto l = network_->lane_index(lane_id);
    if (!l) throw Error(ErrorCode::unknown_lane, "unknown lane '" + std::string(lane_id) + "'");
    return lane_density(*l);
}

std::int64_t World::windowed_waiting_ms() const {
    std::int64_t total = 0;
    for (int l : network_->incoming_lanes()) {
        for (const auto& v : lanes_[static_cast<std::size_t>(l)]) total += v.window.halted_steps() * dt_ms_;
    }
    return total;
}

std::uint64_t World::pending_total() const {
    std::uint64_t total = 0;
    for (auto p : pending_) total += p;
    return total;
}

std::size_t World::in_network() const {
    std::size_t total = 0;
    for (const auto& q : lanes_) total += q.size();
    for (const auto& q : links_) total += q.size();
    return total;
}

void World::place_vehicle(int movement, Stage stage, double position, double speed) {
    const auto& mv = network_->movement(movement);
    VehicleState v;
    v.id = next_id_++;
    v.movement = movement;
    v.stage = stage;
    v.position = position;
    v.speed = speed;
    v.depart_ms = now_ms_;
    v.window = WaitingWindow(window_steps_);
    ++spawned_;
    switch (stage) {
    case Stage::approaching: insert_sorted(lanes_[static_cast<std::size_t>(mv.from_lane)], std::move(v)); break;
    case Stage::crossing: insert_sorted(links_[static_cast<std::size_t>(movement)], std::move(v)); break;
    case Stage::departing: insert_sorted(lanes_[static_cast<std::size_t>(mv.to_lane)], std::move(v)); break;
    case Stage::done: throw Error(ErrorCode::invalid_argument, "cannot place a finished vehicle");
    }
}

void World::for_each_vehicle(const std::function<void(const VehicleState&)>& fn) const {
    for (int l : network_->outgoing_lanes()) {
        for (const auto& v : lanes_[static_cast<std::size_t>(l)]) fn(v);
    }
    for (const auto& q : links_) {
        for (const auto& v : q) fn(v);
    }
    for (int l : network_->incoming_lanes()) {
        for (const auto& v : lanes_[static_cast<std::size_t>(l)]) fn(v);
    }
}

std::uint64_t World::digest() const {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(now_ms_));
    h.add(spawned_);
    h.add(completed_);
    for (auto p : pending_) h.add(p);
    for_each_vehicle([&](const VehicleState& v) {
        h.add(v.id);
        h.add(static_cast<std::uint64_t>(v.movement));
        h.add(static_cast<std::uint64_t>(v.stage));
        h.add(v.position);
        h.add(v.speed);
        h.add(static_cast<std::uint64_t>(v.waiting_ms));
        h.add(static_cast<std::uint64_t>(v.window.halted_steps()));
    });
    return h.value();
}

}  // namespace signal_dojo
