#include "drcorl/cmdp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace drcorl {

namespace {

constexpr double kRowSumTol = 1e-9;

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

TabularPolicy TabularPolicy::uniform(Eigen::Index n_states, Eigen::Index n_actions) {
    TabularPolicy p;
    p.probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / double(n_actions));
    return p;
}

void TabularPolicy::validate() const {
    check(probs.minCoeff() >= 0.0, "policy has negative entries");
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
        check(std::abs(probs.row(s).sum() - 1.0) <= kRowSumTol,
              "policy row " + std::to_string(s) + " does not sum to 1");
    }
}

void TabularCMDP::validate() const {
    check(n_states >= 1 && n_actions >= 1, "empty state or action space");
    check(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
    check(cost_limit >= 0.0, "cost_limit must be >= 0");
    check(Eigen::Index(transition.size()) == n_actions, "transition kernel count");
    for (Eigen::Index a = 0; a < n_actions; ++a) {
        check(transition[a].rows() == n_states && transition[a].cols() == n_states,
              "transition kernel shape");
        check(transition[a].minCoeff() >= 0.0, "negative transition probability");
        for (Eigen::Index s = 0; s < n_states; ++s) {
            check(std::abs(transition[a].row(s).sum() - 1.0) <= kRowSumTol,
                  "transition row does not sum to 1");
        }
    }
    check(reward.rows() == n_states && reward.cols() == n_actions, "reward shape");
    check(cost.rows() == n_states && cost.cols() == n_actions, "cost shape");
    check(reward.minCoeff() >= 0.0 && reward.maxCoeff() <= reward_max,
          "reward out of [0, reward_max]");
    check(cost.minCoeff() >= 0.0 && cost.maxCoeff() <= cost_max,
          "cost out of [0, cost_max]");
    check(initial_dist.size() == n_states, "initial_dist size");
    check(initial_dist.minCoeff() >= 0.0, "negative initial probability");
    check(std::abs(initial_dist.sum() - 1.0) <= kRowSumTol, "initial_dist does not sum to 1");
}

Eigen::MatrixXd TabularCMDP::policy_transition(const TabularPolicy& policy) const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_states, n_states);
    for (Eigen::Index a = 0; a < n_actions; ++a) {
        p += policy.probs.col(a).asDiagonal() * transition[a];
    }
    return p;
}

Eigen::VectorXd TabularCMDP::policy_signal(const TabularPolicy& policy, Signal signal) const {
    return (policy.probs.array() * signal_matrix(signal).array()).rowwise().sum();
}

Eigen::VectorXd evaluate_values(const TabularCMDP& cmdp, const TabularPolicy& policy,
                                Signal signal) {
    cmdp.validate();
    policy.validate();
    const Eigen::MatrixXd p = cmdp.policy_transition(policy);
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(cmdp.n_states, cmdp.n_states) - cmdp.gamma * p;
    return system.partialPivLu().solve(cmdp.policy_signal(policy, signal));
}

Eigen::MatrixXd evaluate_q(const TabularCMDP& cmdp, const TabularPolicy& policy,
                           Signal signal) {
    const Eigen::VectorXd v = evaluate_values(cmdp, policy, signal);
    Eigen::MatrixXd q(cmdp.n_states, cmdp.n_actions);
    for (Eigen::Index a = 0; a < cmdp.n_actions; ++a) {
        q.col(a) = cmdp.signal_matrix(signal).col(a) + cmdp.gamma * cmdp.transition[a] * v;
    }
    return q;
}

Eigen::MatrixXd advantage(const TabularCMDP& cmdp, const TabularPolicy& policy,
                          Signal signal) {
    Eigen::MatrixXd q = evaluate_q(cmdp, policy, signal);
    const Eigen::VectorXd v = (policy.probs.array() * q.array()).rowwise().sum();
    q.colwise() -= v;
    return q;
}

Eigen::VectorXd discounted_stationary_dist(const TabularCMDP& cmdp,
                                           const TabularPolicy& policy) {
    cmdp.validate();
    policy.validate();
    const Eigen::MatrixXd p = cmdp.policy_transition(policy);
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(cmdp.n_states, cmdp.n_states) - cmdp.gamma * p.transpose();
    Eigen::VectorXd d = system.partialPivLu().solve(cmdp.initial_dist);
    return (1.0 - cmdp.gamma) * d;
}

double value_under_initial_dist(const TabularCMDP& cmdp, const Eigen::VectorXd& values) {
    return cmdp.initial_dist.dot(values);
}

double max_policy_kl(const TabularPolicy& p, const TabularPolicy& q) {
    check(p.probs.rows() == q.probs.rows() && p.probs.cols() == q.probs.cols(),
          "policy shape mismatch");
    double worst = 0.0;
    for (Eigen::Index s = 0; s < p.probs.rows(); ++s) {
        double kl = 0.0;
        for (Eigen::Index a = 0; a < p.probs.cols(); ++a) {
            const double ps = p.probs(s, a);
            if (ps == 0.0) continue;
            const double qs = q.probs(s, a);
            if (qs == 0.0) {
                throw std::domain_error("infinite KL: p > 0 where q = 0");
            }
            kl += ps * std::log(ps / qs);
        }
        worst = std::max(worst, kl);
    }
    return worst;
}

namespace {

// Value iteration on an arbitrary signal matrix; maximize or minimize.
OptimalSolution value_iterate(const TabularCMDP& cmdp, const Eigen::MatrixXd& signal,
                              bool maximize, int max_iters, double tol) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(cmdp.n_states);
    Eigen::MatrixXd q(cmdp.n_states, cmdp.n_actions);
    for (int it = 0; it < max_iters; ++it) {
        for (Eigen::Index a = 0; a < cmdp.n_actions; ++a) {
            q.col(a) = signal.col(a) + cmdp.gamma * cmdp.transition[a] * v;
        }
        Eigen::VectorXd next =
            maximize ? q.rowwise().maxCoeff().eval() : q.rowwise().minCoeff().eval();
        const double delta = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (delta < tol) break;
    }
    OptimalSolution sol;
    sol.values = v;
    sol.policy.probs = Eigen::MatrixXd::Zero(cmdp.n_states, cmdp.n_actions);
    for (Eigen::Index s = 0; s < cmdp.n_states; ++s) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < cmdp.n_actions; ++a) {
            const bool better = maximize ? q(s, a) > q(s, best) : q(s, a) < q(s, best);
            if (better) best = a;
        }
        sol.policy.probs(s, best) = 1.0;
    }
    return sol;
}

}  // namespace

OptimalSolution solve_unconstrained(const TabularCMDP& cmdp, Signal signal, bool maximize,
                                    int max_iters, double tol) {
    cmdp.validate();
    return value_iterate(cmdp, cmdp.signal_matrix(signal), maximize, max_iters, tol);
}

double solve_constrained_optimum(const TabularCMDP& cmdp, double limit) {
    cmdp.validate();
    auto solve_lagrangian = [&](double lambda) {
        const Eigen::MatrixXd mixed = cmdp.reward - lambda * cmdp.cost;
        OptimalSolution sol = value_iterate(cmdp, mixed, true, 100000, 1e-12);
        const double vr = value_under_initial_dist(
            cmdp, evaluate_values(cmdp, sol.policy, Signal::Reward));
        const double vc = value_under_initial_dist(
            cmdp, evaluate_values(cmdp, sol.policy, Signal::Cost));
        return std::pair<double, double>(vr, vc);
    };

    auto [vr0, vc0] = solve_lagrangian(0.0);
    if (vc0 <= limit) return vr0;

    // Find a multiplier whose greedy policy is feasible.
    double lo = 0.0, hi = 1.0;
    double vr_hi, vc_hi;
    for (;;) {
        std::tie(vr_hi, vc_hi) = solve_lagrangian(hi);
        if (vc_hi <= limit) break;
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("constrained problem infeasible");
    }
    double vr_lo = vr0, vc_lo = vc0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        auto [vr, vc] = solve_lagrangian(mid);
        if (vc <= limit) {
            hi = mid;
            vr_hi = vr;
            vc_hi = vc;
        } else {
            lo = mid;
            vr_lo = vr;
            vc_lo = vc;
        }
    }
    if (vc_lo <= vc_hi + 1e-12) return vr_hi;
    // Occupancy-measure mixture of the two bracketing policies that sits
    // exactly on the budget; values mix linearly in the mixture weight.
    const double w = (limit - vc_hi) / (vc_lo - vc_hi);
    return vr_hi + w * (vr_lo - vr_hi);
}

void write_cmdp(const TabularCMDP& cmdp, std::ostream& out) {
    out << std::setprecision(17);
    out << cmdp.n_states << ' ' << cmdp.n_actions << ' ' << cmdp.gamma << ' '
        << cmdp.cost_limit << '\n';
    out << cmdp.reward_max << ' ' << cmdp.cost_max << '\n';
    for (Eigen::Index a = 0; a < cmdp.n_actions; ++a) {
        for (Eigen::Index s = 0; s < cmdp.n_states; ++s) {
            for (Eigen::Index t = 0; t < cmdp.n_states; ++t) {
                out << cmdp.transition[a](s, t) << (t + 1 == cmdp.n_states ? '\n' : ' ');
            }
        }
    }
    auto write_matrix = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index s = 0; s < m.rows(); ++s) {
            for (Eigen::Index a = 0; a < m.cols(); ++a) {
                out << m(s, a) << (a + 1 == m.cols() ? '\n' : ' ');
            }
        }
    };
    write_matrix(cmdp.reward);
    write_matrix(cmdp.cost);
    for (Eigen::Index s = 0; s < cmdp.n_states; ++s) {
        out << cmdp.initial_dist[s] << (s + 1 == cmdp.n_states ? '\n' : ' ');
    }
}

TabularCMDP read_cmdp(std::istream& in) {
    TabularCMDP cmdp;
    in >> cmdp.n_states >> cmdp.n_actions >> cmdp.gamma >> cmdp.cost_limit;
    in >> cmdp.reward_max >> cmdp.cost_max;
    if (!in) throw std::runtime_error("malformed CMDP header");
    cmdp.transition.assign(cmdp.n_actions, Eigen::MatrixXd(cmdp.n_states, cmdp.n_states));
    for (Eigen::Index a = 0; a < cmdp.n_actions; ++a) {
        for (Eigen::Index s = 0; s < cmdp.n_states; ++s) {
            for (Eigen::Index t = 0; t < cmdp.n_states; ++t) in >> cmdp.transition[a](s, t);
        }
    }
    cmdp.reward.resize(cmdp.n_states, cmdp.n_actions);
    cmdp.cost.resize(cmdp.n_states, cmdp.n_actions);
    for (Eigen::Index s = 0; s < cmdp.n_states; ++s) {
        for (Eigen::Index a = 0; a < cmdp.n_actions; ++a) in >> cmdp.reward(s, a);
    }
    for (Eigen::Index s = 0; s < cmdp.n_states; ++s) {
        for (Eigen::Index a = 0; a < cmdp.n_actions; ++a) in >> cmdp.cost(s, a);
    }
    cmdp.initial_dist.resize(cmdp.n_states);
    for (Eigen::Index s = 0; s < cmdp.n_states; ++s) in >> cmdp.initial_dist[s];
    if (!in) throw std::runtime_error("malformed CMDP body");
    cmdp.validate();
    return cmdp;
}

void save_cmdp(const TabularCMDP& cmdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_cmdp(cmdp, out);
}

TabularCMDP load_cmdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_cmdp(in);
}

}  // namespace drcorl
