#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace drcorl {

enum class Signal { Reward, Cost };

/// Row-stochastic policy over a finite CMDP: probs(s, a) = pi(a|s).
struct TabularPolicy {
    Eigen::MatrixXd probs;

    static TabularPolicy uniform(Eigen::Index n_states, Eigen::Index n_actions);
    void validate() const;
};

/// Finite CMDP <S, A, P, r, c, gamma> with initial distribution rho and a
/// cost budget. Transition kernels are stored per action as S x S matrices,
/// transition[a](s, s') = P(s'|s,a).
struct TabularCMDP {
    Eigen::Index n_states = 0;
    Eigen::Index n_actions = 0;
    std::vector<Eigen::MatrixXd> transition;
    Eigen::MatrixXd reward;  // r(s, a), entries in [0, reward_max]
    Eigen::MatrixXd cost;    // c(s, a), entries in [0, cost_max]
    double gamma = 0.99;
    Eigen::VectorXd initial_dist;
    double cost_limit = 0.0;
    double reward_max = 1.0;  // M
    double cost_max = 1.0;    // c_max

    void validate() const;

    /// P^pi(s, s') = sum_a pi(a|s) P(s'|s,a).
    Eigen::MatrixXd policy_transition(const TabularPolicy& policy) const;
    /// signal^pi(s) = sum_a pi(a|s) signal(s,a).
    Eigen::VectorXd policy_signal(const TabularPolicy& policy, Signal signal) const;

    const Eigen::MatrixXd& signal_matrix(Signal signal) const {
        return signal == Signal::Reward ? reward : cost;
    }
};

/// V^pi from the exact linear system (I - gamma P^pi) V = signal^pi.
Eigen::VectorXd evaluate_values(const TabularCMDP& cmdp, const TabularPolicy& policy,
                                Signal signal);

/// Q^pi(s,a) = signal(s,a) + gamma sum_s' P(s'|s,a) V^pi(s').
Eigen::MatrixXd evaluate_q(const TabularCMDP& cmdp, const TabularPolicy& policy,
                           Signal signal);

/// A^pi = Q^pi - V^pi broadcast over actions.
Eigen::MatrixXd advantage(const TabularCMDP& cmdp, const TabularPolicy& policy,
                          Signal signal);

/// d^pi_rho = (1-gamma) rho^T (I - gamma P^pi)^{-1}, a distribution over states.
Eigen::VectorXd discounted_stationary_dist(const TabularCMDP& cmdp,
                                           const TabularPolicy& policy);

double value_under_initial_dist(const TabularCMDP& cmdp, const Eigen::VectorXd& values);

/// Max over states of D_KL(p(.|s) || q(.|s)). Uses 0 log(0/q) = 0; throws if
/// some p > 0 where q = 0 (the KL is infinite, which the bounds exclude).
double max_policy_kl(const TabularPolicy& p, const TabularPolicy& q);

struct OptimalSolution {
    Eigen::VectorXd values;
    TabularPolicy policy;  // greedy, deterministic
};

/// Value iteration on a single signal (no constraint). maximize=false solves
/// the cost-minimizing policy.
OptimalSolution solve_unconstrained(const TabularCMDP& cmdp, Signal signal,
                                    bool maximize = true, int max_iters = 100000,
                                    double tol = 1e-12);

/// Best value of the constrained problem max V_r s.t. V_c(rho) <= limit,
/// solved by bisection on the Lagrange multiplier with an exact boundary
/// mixture between the two bracketing deterministic policies.
double solve_constrained_optimum(const TabularCMDP& cmdp, double limit);

void save_cmdp(const TabularCMDP& cmdp, const std::string& path);
TabularCMDP load_cmdp(const std::string& path);
void write_cmdp(const TabularCMDP& cmdp, std::ostream& out);
TabularCMDP read_cmdp(std::istream& in);

}  // namespace drcorl
