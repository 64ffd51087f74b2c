#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcorl/dataset.hpp"
#include "drcorl/mlp.hpp"
#include "drcorl/rng.hpp"

namespace drcorl {

/// Asymmetric expectile loss |tau - 1[u<0]| u^2.
double expectile_loss(double u, double tau);

struct CriticConfig {
    std::vector<Eigen::Index> hidden = {64, 64};
    int ensemble_size = 4;        // E
    double ucb_k = 2.0;           // k
    double pessimism_alpha = 0.2; // alpha
    double expectile_tau = 0.7;
    double soft_update_tau = 0.005;
    double gamma = 0.99;
    std::size_t batch_size = 256;
    Adam::Config adam{};
};

/// Draws a' ~ pi(.|s') during cost-critic bootstrapping; the produced action
/// must be in the same feature space the critics were trained on.
using ActionSampler = std::function<Eigen::VectorXd(const Eigen::VectorXd& state, Rng& rng)>;

/// IQL reward critic pair + value net, and an independently trained ensemble
/// of pessimistic cost critics with slow target copies.
class CriticEnsemble {
public:
    CriticEnsemble() = default;
    CriticEnsemble(Eigen::Index state_dim, Eigen::Index action_dim, CriticConfig cfg,
                   Rng& rng);

    const CriticConfig& config() const { return cfg_; }
    Eigen::Index state_dim() const { return state_dim_; }
    Eigen::Index action_dim() const { return action_dim_; }
    int ensemble_size() const { return int(q_cost_.size()); }

    double reward_q(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;
    double reward_value(const Eigen::VectorXd& state) const;
    double cost_q(int member, const Eigen::VectorXd& state,
                  const Eigen::VectorXd& action) const;
    double cost_q_mean(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;

    /// Ensemble mean + k * population std.
    double ucb_cost(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;

    /// d/d(action) of min(Q_r1, Q_r2).
    Eigen::VectorXd reward_q_grad_action(const Eigen::VectorXd& state,
                                         const Eigen::VectorXd& action) const;
    /// d/d(action) of the UCB cost estimate.
    Eigen::VectorXd ucb_cost_grad_action(const Eigen::VectorXd& state,
                                         const Eigen::VectorXd& action) const;

    /// One IQL minibatch: expectile step on V_r against min of the target
    /// Q pair, then squared-error steps on both Q_r heads toward
    /// r + gamma V_r(s'). Followed by a soft target update.
    void train_reward_step(const TransitionDataset& dataset, Rng& rng);

    /// One TD minibatch per ensemble member against its own target, with the
    /// pessimism term -alpha E[Q_c] pushing estimates up. a' ~ sampler(s').
    void train_cost_step(const TransitionDataset& dataset, const ActionSampler& sampler,
                         Rng& rng);

    void soft_update_targets();

    void save(const std::string& path) const;
    static CriticEnsemble load(const std::string& path);

    /// Direct access for tests.
    Mlp& reward_q1() { return q_r1_; }
    Mlp& reward_q2() { return q_r2_; }
    Mlp& value_net() { return v_r_; }

private:
    Eigen::Index state_dim_ = 0;
    Eigen::Index action_dim_ = 0;
    CriticConfig cfg_;
    Mlp q_r1_, q_r2_, v_r_;
    Mlp q_r1_target_, q_r2_target_;
    std::vector<Mlp> q_cost_;
    std::vector<Mlp> q_cost_target_;
    Adam opt_q_r1_, opt_q_r2_, opt_v_r_;
    std::vector<Adam> opt_q_cost_;

    Eigen::VectorXd join(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;
};

struct EpisodicCostEstimate {
    double q_ucb = 0.0;      // mean over the batch of ucb_cost(s, a ~ pi)
    double episodic = 0.0;   // q_ucb * (1 - gamma) * L
};

/// Offline episodic-cost estimator over a random state batch from the
/// dataset, with actions drawn from the current policy.
EpisodicCostEstimate estimate_episodic_cost(const CriticEnsemble& critics,
                                            const TransitionDataset& dataset,
                                            const ActionSampler& sampler,
                                            std::size_t batch_size, double horizon_length,
                                            double gamma, Rng& rng);

/// One-hot featurization of a tabular dataset (state and action ids become
/// indicator vectors) for critic training.
TransitionDataset one_hot_dataset(const TransitionDataset& dataset, Eigen::Index n_states,
                                  Eigen::Index n_actions);
Eigen::VectorXd one_hot(Eigen::Index index, Eigen::Index size);

}  // namespace drcorl
