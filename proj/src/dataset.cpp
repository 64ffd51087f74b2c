#include "drcorl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace drcorl {

std::vector<EpisodeStats> TransitionDataset::episode_stats() const {
    std::vector<EpisodeStats> stats;
    EpisodeStats current;
    for (const Transition& t : transitions_) {
        current.episodic_return += t.reward;
        current.episodic_cost += t.cost;
        current.length += 1;
        if (t.done) {
            stats.push_back(current);
            current = EpisodeStats{};
        }
    }
    if (current.length > 0) stats.push_back(current);
    return stats;
}

double TransitionDataset::min_episodic_return() const {
    const auto stats = episode_stats();
    if (stats.empty()) throw std::runtime_error("empty dataset has no episodes");
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : stats) m = std::min(m, s.episodic_return);
    return m;
}

double TransitionDataset::max_episodic_return() const {
    const auto stats = episode_stats();
    if (stats.empty()) throw std::runtime_error("empty dataset has no episodes");
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : stats) m = std::max(m, s.episodic_return);
    return m;
}

namespace {

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << v[i];
        if (i + 1 < v.size()) out << ';';
    }
}

Eigen::VectorXd parse_vector(const std::string& field) {
    std::vector<double> vals;
    std::stringstream ss(field);
    std::string part;
    while (std::getline(ss, part, ';')) vals.push_back(std::stod(part));
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), Eigen::Index(vals.size()));
}

}  // namespace

void TransitionDataset::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << std::setprecision(17);
    out << "state,action,reward,next_state,cost,done\n";
    for (const Transition& t : transitions_) {
        write_vector(out, t.state);
        out << ',';
        write_vector(out, t.action);
        out << ',' << t.reward << ',';
        write_vector(out, t.next_state);
        out << ',' << t.cost << ',' << (t.done ? 1 : 0) << '\n';
    }
}

TransitionDataset TransitionDataset::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset " + path);
    std::string line;
    if (!std::getline(in, line) || line != "state,action,reward,next_state,cost,done") {
        throw std::runtime_error("bad dataset header in " + path);
    }
    TransitionDataset ds;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        Transition t;
        std::getline(ss, field, ',');
        t.state = parse_vector(field);
        std::getline(ss, field, ',');
        t.action = parse_vector(field);
        std::getline(ss, field, ',');
        t.reward = std::stod(field);
        std::getline(ss, field, ',');
        t.next_state = parse_vector(field);
        std::getline(ss, field, ',');
        t.cost = std::stod(field);
        std::getline(ss, field, ',');
        t.done = field == "1";
        ds.push_back(std::move(t));
    }
    return ds;
}

Eigen::VectorXd TabularEnv::reset(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index s = 0; s < cmdp_.n_states; ++s) {
        acc += cmdp_.initial_dist[s];
        if (u <= acc) return Eigen::VectorXd::Constant(1, double(s));
    }
    return Eigen::VectorXd::Constant(1, double(cmdp_.n_states - 1));
}

Env::Step TabularEnv::step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                           Rng& rng) const {
    const auto s = Eigen::Index(state[0]);
    const auto a = Eigen::Index(action[0]);
    Step out;
    out.reward = cmdp_.reward(s, a);
    out.cost = cmdp_.cost(s, a);
    const double u = rng.uniform();
    double acc = 0.0;
    Eigen::Index next = cmdp_.n_states - 1;
    for (Eigen::Index t = 0; t < cmdp_.n_states; ++t) {
        acc += cmdp_.transition[a](s, t);
        if (u <= acc) {
            next = t;
            break;
        }
    }
    out.next_state = Eigen::VectorXd::Constant(1, double(next));
    return out;
}

BehaviorPolicyFn make_tabular_behavior(const TabularPolicy& policy) {
    return [policy](const Eigen::VectorXd& state, Rng& rng) {
        const auto s = Eigen::Index(state[0]);
        const double u = rng.uniform();
        double acc = 0.0;
        Eigen::Index chosen = policy.probs.cols() - 1;
        for (Eigen::Index a = 0; a < policy.probs.cols(); ++a) {
            acc += policy.probs(s, a);
            if (u <= acc) {
                chosen = a;
                break;
            }
        }
        return Eigen::VectorXd::Constant(1, double(chosen));
    };
}

TransitionDataset rollout(const Env& env, const BehaviorPolicyFn& behavior,
                          std::size_t n_episodes, std::size_t horizon, std::uint64_t seed) {
    if (n_episodes == 0) throw std::invalid_argument("rollout needs at least one episode");
    if (horizon == 0) throw std::invalid_argument("rollout horizon must be >= 1");
    Rng rng(seed);
    TransitionDataset ds;
    for (std::size_t ep = 0; ep < n_episodes; ++ep) {
        Eigen::VectorXd state = env.reset(rng);
        for (std::size_t step = 0; step < horizon; ++step) {
            Transition t;
            t.state = state;
            t.action = behavior(state, rng);
            Env::Step result = env.step(state, t.action, rng);
            t.reward = result.reward;
            t.cost = result.cost;
            t.next_state = result.next_state;
            t.done = step + 1 == horizon;
            state = t.next_state;
            ds.push_back(std::move(t));
        }
    }
    return ds;
}

EpisodeStats evaluate_episode(const Env& env, const BehaviorPolicyFn& policy,
                              std::size_t horizon, Rng& rng) {
    EpisodeStats stats;
    Eigen::VectorXd state = env.reset(rng);
    for (std::size_t step = 0; step < horizon; ++step) {
        const Eigen::VectorXd action = policy(state, rng);
        Env::Step result = env.step(state, action, rng);
        stats.episodic_return += result.reward;
        stats.episodic_cost += result.cost;
        stats.length += 1;
        state = result.next_state;
    }
    return stats;
}

double normalized_return(double episodic_return, double r_min, double r_max) {
    if (!(r_max > r_min)) throw std::invalid_argument("normalized_return needs r_max > r_min");
    return (episodic_return - r_min) / (r_max - r_min);
}

double normalized_cost(double episodic_cost, double c_min, double cost_limit, double eps) {
    if (!(cost_limit + eps > 0.0)) {
        throw std::invalid_argument("normalized_cost needs cost_limit + eps > 0");
    }
    return (episodic_cost - c_min) / (cost_limit + eps);
}

}  // namespace drcorl
