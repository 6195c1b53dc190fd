#include "signal_dojo/observe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "signal_dojo/error.hpp"

namespace signal_dojo {

const char* obs_kind_name(ObsKind kind) noexcept {
    switch (kind) {
    case ObsKind::feature: return "feature";
    case ObsKind::noisy_feature: return "noisy_feature";
    case ObsKind::bev: return "bev";
    case ObsKind::multiview: return "multiview";
    }
    return "feature";
}

std::optional<ObsKind> parse_obs_kind(std::string_view token) noexcept {
    if (token == "feature" || token == "F") return ObsKind::feature;
    if (token == "noisy_feature" || token == "noisy" || token == "F*") return ObsKind::noisy_feature;
    if (token == "bev" || token == "BEV") return ObsKind::bev;
    if (token == "multiview" || token == "MV") return ObsKind::multiview;
    return std::nullopt;
}

std::vector<double> FeatureObs::flatten() const {
    std::vector<double> out;
    out.reserve(size());
    out.insert(out.end(), phase_onehot.begin(), phase_onehot.end());
    out.push_back(min_green_flag);
    out.insert(out.end(), densities.begin(), densities.end());
    out.insert(out.end(), queues_norm.begin(), queues_norm.end());
    return out;
}

double RasterObs::channel_mass(int channel) const {
    double total = 0.0;
    for (std::size_t i = static_cast<std::size_t>(channel); i < pixels.size(); i += kChannels) total += pixels[i];
    return total;
}

FeatureObs feature_obs(const World& world, const SignalState& signal, const SignalTiming& timing) {
    const auto& spec = world.network();
    FeatureObs obs;
    obs.phase_onehot.assign(spec.phase_count(), 0.0);
    obs.phase_onehot[static_cast<std::size_t>(signal.current_phase)] = 1.0;
    obs.min_green_flag = signal.phase_elapsed_ms >= timing.min_green_ms ? 1.0 : 0.0;
    for (int l : spec.incoming_lanes()) {
        obs.densities.push_back(world.lane_density(l));
        const double cap = spec.lane(l).capacity;
        obs.queues_norm.push_back(std::clamp(world.queue_count(l) / cap, 0.0, 1.0));
    }
    return obs;
}

FeatureObs noisy_feature_obs(const World& world, const SignalState& signal, const SignalTiming& timing,
                             const NoiseParams& noise, std::mt19937_64& rng) {
    FeatureObs obs = feature_obs(world, signal, timing);
    std::normal_distribution<double> factor(noise.mean_factor, noise.std_factor);
    auto perturb = [&](std::vector<double>& values) {
        for (auto& v : values) v = std::clamp(v * factor(rng), noise.clamp_low, 1.0);
    };
    perturb(obs.densities);
    perturb(obs.queues_norm);
    return obs;
}

double default_extent(const NetworkSpec& spec) { return 2.0 * spec.max_incoming_length(); }

namespace {

using Polygon = std::vector<Point>;

Point sub(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point add(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point mul(Point a, double s) { return {a.x * s, a.y * s}; }
double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }

Point unit(Point a) {
    const double n = std::hypot(a.x, a.y);
    return n > 0 ? mul(a, 1.0 / n) : Point{0.0, 1.0};
}

Polygon rectangle(Point front, Point dir, double length, double width) {
    const Point side{dir.y * width / 2, -dir.x * width / 2};
    const Point rear = sub(front, mul(dir, length));
    return {add(front, side), sub(front, side), sub(rear, side), add(rear, side)};
}

// Keeps the part of `poly` where a*x + b*y + c >= 0.
Polygon clip_half_plane(const Polygon& poly, double a, double b, double c) {
    Polygon out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point p = poly[i];
        const Point q = poly[(i + 1) % n];
        const double fp = a * p.x + b * p.y + c;
        const double fq = a * q.x + b * q.y + c;
        if (fp >= 0) out.push_back(p);
        if ((fp >= 0) != (fq >= 0)) {
            const double t = fp / (fp - fq);
            out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
        }
    }
    return out;
}

double area(const Polygon& poly) {
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point p = poly[i];
        const Point q = poly[(i + 1) % poly.size()];
        s += p.x * q.y - q.x * p.y;
    }
    return std::abs(s) / 2.0;
}

// World-to-pixel mapping for one view; pixel (r, c) covers [c, c+1] x [r, r+1].
class View {
public:
    View(Point centre, Point up, double size_m, int resolution, bool cone)
        : centre_(centre), up_(up), right_{up.y, -up.x}, scale_(resolution / size_m),
          half_(resolution / 2.0), resolution_(resolution), cone_(cone) {}

    Point to_pixel(Point w) const {
        const Point d = sub(w, centre_);
        return {half_ + dot(d, right_) * scale_, half_ - dot(d, up_) * scale_};
    }

    // Paints the coverage of a convex world polygon into `channel`.
    void paint(RasterObs& raster, const Polygon& world_poly, int channel, float value, bool accumulate) const {
        if (value <= 0.0f) return;
        Polygon poly;
        poly.reserve(world_poly.size());
        for (const auto& p : world_poly) poly.push_back(to_pixel(p));
        if (cone_) {
            // The junction centre sits at the bottom middle: along = res - y, lateral = x - half.
            const double r = resolution_;
            poly = clip_half_plane(poly, -1.0, -1.0, r + half_);  // along - lateral >= 0
            poly = clip_half_plane(poly, 1.0, -1.0, r - half_);   // along + lateral >= 0
        }
        if (poly.size() < 3) return;
        double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
        for (const auto& p : poly) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        const int c0 = std::max(0, static_cast<int>(std::floor(min_x)));
        const int c1 = std::min(resolution_ - 1, static_cast<int>(std::ceil(max_x)) - 1);
        const int r0 = std::max(0, static_cast<int>(std::floor(min_y)));
        const int r1 = std::min(resolution_ - 1, static_cast<int>(std::ceil(max_y)) - 1);
        for (int row = r0; row <= r1; ++row) {
            for (int col = c0; col <= c1; ++col) {
                Polygon cell = clip_half_plane(poly, 1.0, 0.0, -col);
                cell = clip_half_plane(cell, -1.0, 0.0, col + 1.0);
                cell = clip_half_plane(cell, 0.0, 1.0, -row);
                cell = clip_half_plane(cell, 0.0, -1.0, row + 1.0);
                if (cell.size() < 3) continue;
                const double cover = std::min(1.0, area(cell));
                if (cover <= 0.0) continue;
                float& px = raster.pixels[(static_cast<std::size_t>(row) * static_cast<std::size_t>(resolution_) +
                                           static_cast<std::size_t>(col)) * RasterObs::kChannels +
                                          static_cast<std::size_t>(channel)];
                const float v = static_cast<float>(cover) * value;
                px = accumulate ? std::min(1.0f, px + v) : std::max(px, v);
            }
        }
    }

private:
    Point centre_;
    Point up_;
    Point right_;
    double scale_;
    double half_;
    int resolution_;
    bool cone_;
};

float aspect_intensity(Aspect a) {
    switch (a) {
    case Aspect::green: return 1.0f;
    case Aspect::yellow: return 0.5f;
    case Aspect::red: return 0.0f;
    }
    return 0.0f;
}

Polygon vehicle_footprint(const VehicleState& v, const NetworkSpec& spec, const DynamicsParams& params) {
    const auto& mv = spec.movement(v.movement);
    if (v.stage == Stage::crossing) {
        const Point chord = sub(mv.chord_end, mv.chord_start);
        const double frac = std::clamp(v.position / mv.link_length, 0.0, 1.0);
        const Point front = add(mv.chord_start, mul(chord, frac));
        return rectangle(front, unit(chord), params.vehicle_length, params.vehicle_width);
    }
    const auto& lane = spec.lane(v.stage == Stage::approaching ? mv.from_lane : mv.to_lane);
    const Point dir = unit(sub(lane.end, lane.start));
    return rectangle(add(lane.start, mul(dir, v.position)), dir, params.vehicle_length, params.vehicle_width);
}

RasterObs render(const World& world, const SignalState& signal, const View& view, int resolution) {
    const auto& spec = world.network();
    RasterObs raster;
    raster.resolution = resolution;
    raster.pixels.assign(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution) *
                             RasterObs::kChannels,
                         0.0f);
    const double e = spec.junction_extent();
    view.paint(raster, {{-e, e}, {e, e}, {e, -e}, {-e, -e}}, 0, 1.0f, false);
    for (std::size_t l = 0; l < spec.lanes().size(); ++l) {
        const auto& lane = spec.lane(static_cast<int>(l));
        const Point dir = unit(sub(lane.end, lane.start));
        view.paint(raster, rectangle(lane.end, dir, lane.length, NetworkSpec::kLaneWidth), 0, 1.0f, false);
        if (lane.kind == LaneKind::incoming) {
            const float intensity = aspect_intensity(lane_aspect(signal, static_cast<int>(l), spec));
            view.paint(raster, rectangle(lane.end, dir, 2.0, NetworkSpec::kLaneWidth), 2, intensity, false);
        }
    }
    world.for_each_vehicle([&](const VehicleState& v) {
        view.paint(raster, vehicle_footprint(v, spec, world.params()), 1, 1.0f, true);
    });
    return raster;
}

void check_resolution(int resolution) {
    if (resolution < 8 || resolution > 4096) {
        throw Error(ErrorCode::bad_resolution, "resolution " + std::to_string(resolution) + " outside [8, 4096]");
    }
}

}  // namespace

RasterObs bev_raster(const World& world, const SignalState& signal, int resolution, double extent) {
    check_resolution(resolution);
    if (!(extent > 0.0)) throw Error(ErrorCode::invalid_argument, "raster extent must be positive");
    const View view({0.0, 0.0}, {0.0, 1.0}, extent, resolution, false);
    return render(world, signal, view, resolution);
}

std::vector<RasterObs> multi_view_raster(const World& world, const SignalState& signal, int resolution,
                                         double extent) {
    check_resolution(resolution);
    if (!(extent > 0.0)) throw Error(ErrorCode::invalid_argument, "raster extent must be positive");
    const auto& spec = world.network();
    std::vector<RasterObs> views;
    for (std::size_t a = 0; a < spec.approach_count(); ++a) {
        const Point up = spec.approach_direction(static_cast<int>(a));
        const View view(mul(up, extent / 4.0), up, extent / 2.0, resolution, true);
        views.push_back(render(world, signal, view, resolution));
    }
    return views;
}

namespace {

unsigned char to_byte(float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::ofstream open_image(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path + "'");
    return out;
}

}  // namespace

void write_pgm(const RasterObs& raster, int channel, const std::string& path) {
    auto out = open_image(path);
    out << "P5\n" << raster.resolution << ' ' << raster.resolution << "\n255\n";
    for (int r = 0; r < raster.resolution; ++r) {
        for (int c = 0; c < raster.resolution; ++c) out.put(static_cast<char>(to_byte(raster.at(r, c, channel))));
    }
    if (!out) throw Error(ErrorCode::io_error, "failed writing '" + path + "'");
}

void write_ppm(const RasterObs& raster, const std::string& path) {
    auto out = open_image(path);
    out << "P6\n" << raster.resolution << ' ' << raster.resolution << "\n255\n";
    for (int r = 0; r < raster.resolution; ++r) {
        for (int c = 0; c < raster.resolution; ++c) {
            const float road = 0.35f * raster.at(r, c, 0);
            const float car = raster.at(r, c, 1);
            const float light = raster.at(r, c, 2);
            out.put(static_cast<char>(to_byte(std::max({road, car, light > 0.0f && light < 1.0f ? light * 2 : 0.0f}))));
            out.put(static_cast<char>(to_byte(std::max({road, car, light}))));
            out.put(static_cast<char>(to_byte(std::max(road, car))));
        }
    }
    if (!out) throw Error(ErrorCode::io_error, "failed writing '" + path + "'");
}

}  // namespace signal_dojo
