#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcorl/cmdp.hpp"
#include "drcorl/rng.hpp"

namespace drcorl {

/// One offline tuple (s, a, r, s', c). Tabular ids are stored as 1-d vectors
/// so tabular and continuous tasks share one dataset type.
struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    double cost = 0.0;
    bool done = false;
};

struct EpisodeStats {
    double episodic_return = 0.0;  // undiscounted sum of rewards
    double episodic_cost = 0.0;    // undiscounted sum of costs
    std::size_t length = 0;
};

class TransitionDataset {
public:
    void push_back(Transition t) { transitions_.push_back(std::move(t)); }
    std::size_t size() const { return transitions_.size(); }
    bool empty() const { return transitions_.empty(); }
    const Transition& operator[](std::size_t i) const { return transitions_[i]; }
    const std::vector<Transition>& transitions() const { return transitions_; }

    /// Episodic sums reconstructed from the stored done flags.
    std::vector<EpisodeStats> episode_stats() const;
    double min_episodic_return() const;
    double max_episodic_return() const;

    void save_csv(const std::string& path) const;
    static TransitionDataset load_csv(const std::string& path);

private:
    std::vector<Transition> transitions_;
};

/// Environment interface for rollouts. Tabular CMDPs and the toy continuous
/// env both implement it.
class Env {
public:
    virtual ~Env() = default;
    virtual Eigen::Index state_dim() const = 0;
    virtual Eigen::Index action_dim() const = 0;
    virtual Eigen::VectorXd reset(Rng& rng) const = 0;
    struct Step {
        double reward = 0.0;
        double cost = 0.0;
        Eigen::VectorXd next_state;
    };
    virtual Step step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                      Rng& rng) const = 0;
};

/// Samples next states / rewards / costs from an exact tabular model.
class TabularEnv : public Env {
public:
    explicit TabularEnv(TabularCMDP cmdp) : cmdp_(std::move(cmdp)) { cmdp_.validate(); }
    const TabularCMDP& cmdp() const { return cmdp_; }

    Eigen::Index state_dim() const override { return 1; }
    Eigen::Index action_dim() const override { return 1; }
    Eigen::VectorXd reset(Rng& rng) const override;
    Step step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
              Rng& rng) const override;

private:
    TabularCMDP cmdp_;
};

using BehaviorPolicyFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& state, Rng& rng)>;

BehaviorPolicyFn make_tabular_behavior(const TabularPolicy& policy);

/// Roll out n_episodes of fixed horizon. Deterministic for a fixed seed; the
/// final step of every episode carries done = true.
TransitionDataset rollout(const Env& env, const BehaviorPolicyFn& behavior,
                          std::size_t n_episodes, std::size_t horizon, std::uint64_t seed);

EpisodeStats evaluate_episode(const Env& env, const BehaviorPolicyFn& policy,
                              std::size_t horizon, Rng& rng);

double normalized_return(double episodic_return, double r_min, double r_max);
double normalized_cost(double episodic_cost, double c_min, double cost_limit,
                       double eps = 0.1);

}  // namespace drcorl
