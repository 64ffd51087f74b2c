#pragma once

#include <vector>

#include <Eigen/Dense>

#include "drcorl/cmdp.hpp"
#include "drcorl/safe_adapt.hpp"

namespace drcorl {

/// Tabular policy pi(a|s) proportional to exp(logits(s,a)).
struct SoftmaxTabularPolicy {
    Eigen::MatrixXd logits;  // states x actions

    static SoftmaxTabularPolicy uniform(Eigen::Index n_states, Eigen::Index n_actions);
    TabularPolicy policy() const;
};

/// Natural policy gradient step under softmax parameterization:
/// pi_{t+1}(a|s) proportional to pi_t(a|s) exp(eta Q(s,a)/(1-gamma)),
/// applied in logit space.
void npg_update(SoftmaxTabularPolicy& policy, const Eigen::MatrixXd& q, double eta,
                double gamma);

struct HarnessConfig {
    double eta = 0.3;
    // The convergence bound picks the step size as a function of the horizon;
    // when set, the effective step is eta / sqrt(T).
    bool eta_scales_with_horizon = true;
    SlackBand band{0.05, 0.05, /*decay=*/false};
    bool auto_slack = false;   // derive h^+ from the problem size instead
    double eps_dist = 0.0;     // only used by the auto-slack formula
};

struct HarnessIterate {
    Region region = Region::Safe;
    double weight = 0.0;             // mixture weight w_t
    double weight_halved = 0.0;      // alternative conflict weight with the /2 factor
    double v_r = 0.0;                // V_r(rho) of the iterate
    double v_c = 0.0;                // V_c(rho) of the iterate
};

struct HarnessReport {
    std::size_t iterations = 0;
    bool degenerate = false;         // all mixture weights were zero
    double optimal_v_r = 0.0;        // best constrained value
    double weighted_v_r = 0.0;       // V_r(rho) of the weighted mixture policy
    double weighted_v_c = 0.0;
    double final_v_r = 0.0;          // values of the last iterate
    double final_v_c = 0.0;
    double gap = 0.0;                // optimal_v_r - weighted_v_r
    double violation = 0.0;          // weighted_v_c - cost limit
    double h_plus = 0.0;
    std::vector<HarnessIterate> iterates;
};

/// Suggested slack from the convergence bound:
/// 2 sqrt(|S||A| / ((1-gamma)^3 T)) (eps_dist + 4 M^2 + 6 M).
double auto_slack(const TabularCMDP& cmdp, std::size_t T, double eps_dist);

/// Runs T iterations of region-switched NPG with exact policy evaluation.
/// The safe branch ascends Q_r, the unsafe branch ascends -Q_c, the band uses
/// the combination rule on the flattened Q surrogates. The reported mixture
/// policy averages the iterates with region-dependent weights (safe 1,
/// unsafe 0, align 1/2, conflict 1/2 - <g_r,g_c>/||g_r||^2).
HarnessReport tabular_theorem_harness(const TabularCMDP& cmdp, std::size_t T,
                                      const HarnessConfig& cfg);

void save_harness_csv(const std::vector<HarnessReport>& reports,
                      const std::vector<std::size_t>& horizons, const std::string& path);

/// Built-in 4-state, 2-action chain: action 1 earns reward but drifts toward
/// the costly end state, action 0 retreats. The cost limit sits between the
/// two pure policies' values so the harness has to balance both signals.
TabularCMDP four_state_cmdp();

}  // namespace drcorl
