#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "signal_dojo/env.hpp"

namespace signal_dojo {

struct LearnerParams {
    double alpha = 0.1;
    double gamma = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_episodes = 50;
    int bins = 4;

    /// Linear decay from epsilon_start to epsilon_end over the first decay episodes.
    double epsilon_at(int episode) const;
};

/// Canonical key: "phase;flag;b0,b1,..." with floor(entry * bins) capped at bins - 1.
std::string discretize(const FeatureObs& obs, int bins = 4);

class QTable {
public:
    QTable(int actions, double alpha, double gamma);

    int actions() const noexcept { return actions_; }
    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }
    std::size_t size() const noexcept { return table_.size(); }

    /// Unseen states read as all-zero rows.
    const std::vector<double>& values(const std::string& state) const;
    std::vector<double>& row(const std::string& state);

    void update(const std::string& state, int action, double reward, const std::string& next_state);
    /// Lowest index among maximal values.
    int greedy(const std::string& state) const;

    /// Sorted "key<TAB>v0 v1 ..." lines after a header line.
    void save(std::ostream& out) const;
    static QTable load(std::istream& in);

    const std::map<std::string, std::vector<double>>& entries() const noexcept { return table_; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    int actions_;
    double alpha_;
    double gamma_;
    std::vector<double> zeros_;
    std::map<std::string, std::vector<double>> table_;
};

int epsilon_greedy(const QTable& table, const std::string& state, double epsilon, std::mt19937_64& rng);

struct TrainResult {
    QTable table;
    std::vector<double> curve;  // per-episode reward sums
};

/// Episode e runs with seed config.seed + e. Throws Error(unsupported_obs_kind) for rasters.
TrainResult train(std::shared_ptr<const NetworkSpec> network, ScenarioConfig config, int episodes,
                  LearnerParams params = {});

class GreedyQController final : public Controller {
public:
    GreedyQController(std::shared_ptr<const QTable> table, int bins) : table_(std::move(table)), bins_(bins) {}
    std::string_view name() const override { return "rl"; }
    int act(const Environment& env, const Observation& observation) override;

private:
    std::shared_ptr<const QTable> table_;
    int bins_;
};

}  // namespace signal_dojo
