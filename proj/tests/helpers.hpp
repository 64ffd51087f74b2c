#pragma once

#include <algorithm>
#include <vector>

#include "drcorl/cmdp.hpp"
#include "drcorl/rng.hpp"

namespace drcorl::testing {

inline TabularCMDP random_cmdp(Eigen::Index n_states, Eigen::Index n_actions, double gamma,
                               Rng& rng) {
    TabularCMDP m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.transition.assign(std::size_t(n_actions), Eigen::MatrixXd::Zero(n_states, n_states));
    for (auto& p : m.transition) {
        for (Eigen::Index s = 0; s < n_states; ++s) {
            double sum = 0.0;
            for (Eigen::Index s2 = 0; s2 < n_states; ++s2) {
                p(s, s2) = rng.uniform(0.05, 1.0);
                sum += p(s, s2);
            }
            p.row(s) /= sum;
        }
    }
    m.reward.resize(n_states, n_actions);
    m.cost.resize(n_states, n_actions);
    for (Eigen::Index s = 0; s < n_states; ++s) {
        for (Eigen::Index a = 0; a < n_actions; ++a) {
            m.reward(s, a) = rng.uniform();
            m.cost(s, a) = rng.uniform();
        }
    }
    m.initial_dist.resize(n_states);
    double sum = 0.0;
    for (Eigen::Index s = 0; s < n_states; ++s) {
        m.initial_dist[s] = rng.uniform(0.05, 1.0);
        sum += m.initial_dist[s];
    }
    m.initial_dist /= sum;
    m.cost_limit = 1.0;
    m.reward_max = 1.0;
    m.cost_max = 1.0;
    return m;
}

inline TabularPolicy random_policy(Eigen::Index n_states, Eigen::Index n_actions, Rng& rng,
                                   double min_prob = 0.05) {
    TabularPolicy p;
    p.probs.resize(n_states, n_actions);
    for (Eigen::Index s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (Eigen::Index a = 0; a < n_actions; ++a) {
            p.probs(s, a) = rng.uniform(min_prob, 1.0);
            sum += p.probs(s, a);
        }
        p.probs.row(s) /= sum;
    }
    return p;
}

/// Empirical 1-d Wasserstein-1 between two equally sized samples.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / double(a.size());
}

}  // namespace drcorl::testing
