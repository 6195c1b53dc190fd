#include "signal_dojo/learner.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "signal_dojo/error.hpp"

namespace signal_dojo {

double LearnerParams::epsilon_at(int episode) const {
    if (epsilon_decay_episodes <= 0 || episode >= epsilon_decay_episodes) return epsilon_end;
    const double frac = static_cast<double>(episode) / epsilon_decay_episodes;
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

std::string discretize(const FeatureObs& obs, int bins) {
    if (bins < 1) throw Error(ErrorCode::invalid_argument, "bins must be positive");
    const auto phase = std::max_element(obs.phase_onehot.begin(), obs.phase_onehot.end()) - obs.phase_onehot.begin();
    std::string key = std::to_string(phase) + ";" + (obs.min_green_flag > 0.5 ? "1" : "0") + ";";
    bool first = true;
    auto put = [&](double v) {
        const int b = std::clamp(static_cast<int>(v * bins), 0, bins - 1);
        if (!first) key += ',';
        key += std::to_string(b);
        first = false;
    };
    for (double v : obs.densities) put(v);
    for (double v : obs.queues_norm) put(v);
    return key;
}

QTable::QTable(int actions, double alpha, double gamma)
    : actions_(actions), alpha_(alpha), gamma_(gamma), zeros_(static_cast<std::size_t>(actions), 0.0) {
    if (actions < 1) throw Error(ErrorCode::invalid_argument, "Q-table needs at least one action");
    // alpha = 0 is accepted so a table can be frozen.
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "alpha must lie in [0, 1]");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::invalid_argument, "gamma must lie in [0, 1]");
}

const std::vector<double>& QTable::values(const std::string& state) const {
    const auto it = table_.find(state);
    return it == table_.end() ? zeros_ : it->second;
}

std::vector<double>& QTable::row(const std::string& state) {
    return table_.try_emplace(state, zeros_).first->second;
}

void QTable::update(const std::string& state, int action, double reward, const std::string& next_state) {
    const auto& next = values(next_state);
    const double target = reward + gamma_ * *std::max_element(next.begin(), next.end());
    auto& q = row(state);
    q.at(static_cast<std::size_t>(action)) += alpha_ * (target - q[static_cast<std::size_t>(action)]);
}

int QTable::greedy(const std::string& state) const {
    const auto& q = values(state);
    return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

void QTable::save(std::ostream& out) const {
    char buf[32];
    auto put = [&](double v) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, res.ptr - buf);
    };
    out << "# qtable actions=" << actions_ << " alpha=";
    put(alpha_);
    out << " gamma=";
    put(gamma_);
    out << '\n';
    for (const auto& [key, q] : table_) {
        out << key << '\t';
        for (std::size_t a = 0; a < q.size(); ++a) {
            if (a > 0) out << ' ';
            put(q[a]);
        }
        out << '\n';
    }
}

QTable QTable::load(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw Error(ErrorCode::parse_error, "empty Q-table file");
    int actions = 0;
    double alpha = 0.0;
    double gamma = 0.0;
    if (std::sscanf(header.c_str(), "# qtable actions=%d alpha=%lf gamma=%lf", &actions, &alpha, &gamma) != 3) {
        throw Error(ErrorCode::parse_error, "bad Q-table header");
    }
    QTable table(actions, alpha, gamma);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error(ErrorCode::parse_error, "Q-table line without key");
        std::vector<double> q;
        const char* p = line.data() + tab + 1;
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc()) throw Error(ErrorCode::parse_error, "bad Q value in '" + line + "'");
            q.push_back(v);
            p = res.ptr;
        }
        if (static_cast<int>(q.size()) != actions) {
            throw Error(ErrorCode::parse_error, "Q-table row has wrong arity: '" + line + "'");
        }
        table.table_.emplace(line.substr(0, tab), std::move(q));
    }
    return table;
}

int epsilon_greedy(const QTable& table, const std::string& state, double epsilon, std::mt19937_64& rng) {
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
        return std::uniform_int_distribution<int>(0, table.actions() - 1)(rng);
    }
    return table.greedy(state);
}

TrainResult train(std::shared_ptr<const NetworkSpec> network, ScenarioConfig config, int episodes,
                  LearnerParams params) {
    if (config.obs_kind != ObsKind::feature && config.obs_kind != ObsKind::noisy_feature) {
        throw Error(ErrorCode::unsupported_obs_kind, "tabular learner needs feature observations");
    }
    if (episodes < 0) throw Error(ErrorCode::invalid_argument, "episode count must be nonnegative");
    params.gamma = config.gamma;
    Environment env(network, config);
    TrainResult result{QTable(env.action_spec().n, params.alpha, params.gamma), {}};
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      0xe9u};
    std::mt19937_64 rng(seq);
    for (int e = 0; e < episodes; ++e) {
        const double epsilon = params.epsilon_at(e);
        Observation obs = env.reset(config.seed + static_cast<std::uint64_t>(e));
        std::string state = discretize(obs.features, params.bins);
        double total = 0.0;
        while (!env.truncated()) {
            const int action = epsilon_greedy(result.table, state, epsilon, rng);
            StepResult step = env.step(action);
            std::string next = discretize(step.observation.features, params.bins);
            result.table.update(state, action, step.reward, next);
            total += step.reward;
            state = std::move(next);
        }
        result.curve.push_back(total);
    }
    return result;
}

int GreedyQController::act(const Environment&, const Observation& observation) {
    if (observation.kind != ObsKind::feature && observation.kind != ObsKind::noisy_feature) {
        throw Error(ErrorCode::unsupported_obs_kind, "Q-table policy needs feature observations");
    }
    return table_->greedy(discretize(observation.features, bins_));
}

}  // namespace signal_dojo
