#pragma once

#include <cstddef>
#include <random>
#include <string_view>
#include <optional>
#include <vector>

#include "signal_dojo/dynamics.hpp"
#include "signal_dojo/signal.hpp"

namespace signal_dojo {

enum class ObsKind { feature, noisy_feature, bev, multiview };

const char* obs_kind_name(ObsKind kind) noexcept;
std::optional<ObsKind> parse_obs_kind(std::string_view token) noexcept;

/// Layout: phase one-hot (G), min-green flag, lane densities (L), normalised queues (L).
struct FeatureObs {
    std::vector<double> phase_onehot;
    double min_green_flag = 0.0;
    std::vector<double> densities;
    std::vector<double> queues_norm;

    std::vector<double> flatten() const;
    std::size_t size() const noexcept { return phase_onehot.size() + 1 + densities.size() + queues_norm.size(); }

    friend bool operator==(const FeatureObs&, const FeatureObs&) = default;
};

struct NoiseParams {
    double mean_factor = 0.70;
    double std_factor = 0.075;
    double clamp_low = 0.0;
};

/// Channels: 0 drivable area, 1 vehicle occupancy, 2 stop-line aspect (green 1, yellow 0.5, red 0).
struct RasterObs {
    static constexpr int kChannels = 3;

    int resolution = 0;
    std::vector<float> pixels;  // row-major H x W x 3, row 0 at the top

    float at(int row, int col, int channel) const {
        return pixels[(static_cast<std::size_t>(row) * static_cast<std::size_t>(resolution) +
                       static_cast<std::size_t>(col)) * kChannels + static_cast<std::size_t>(channel)];
    }
    double channel_mass(int channel) const;
};

FeatureObs feature_obs(const World& world, const SignalState& signal, const SignalTiming& timing);

/// Scales every density and queue entry by an independent Normal(mean, std) factor and
/// clamps to [clamp_low, 1].
FeatureObs noisy_feature_obs(const World& world, const SignalState& signal, const SignalTiming& timing,
                             const NoiseParams& noise, std::mt19937_64& rng);

/// Default raster extent: twice the longest incoming lane.
double default_extent(const NetworkSpec& spec);

/// Top-down raster centred on the junction, north up. Throws Error(bad_resolution) below 8 px.
RasterObs bev_raster(const World& world, const SignalState& signal, int resolution, double extent);

/// One raster per approach, rotated so the approach points up. Each view covers the
/// approach side of the junction (along-axis 0..extent/2) restricted to the quarter-plane
/// cone |lateral| <= along, so the four views partition the plane without overlap.
std::vector<RasterObs> multi_view_raster(const World& world, const SignalState& signal, int resolution,
                                         double extent);

/// Writes a binary PGM (single channel) or PPM (composited) image.
void write_pgm(const RasterObs& raster, int channel, const std::string& path);
void write_ppm(const RasterObs& raster, const std::string& path);

}  // namespace signal_dojo
