#include "drcorl/npg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "drcorl/grad_manip.hpp"

namespace drcorl {

SoftmaxTabularPolicy SoftmaxTabularPolicy::uniform(Eigen::Index n_states,
                                                   Eigen::Index n_actions) {
    return {Eigen::MatrixXd::Zero(n_states, n_actions)};
}

TabularPolicy SoftmaxTabularPolicy::policy() const {
    TabularPolicy out;
    out.probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        const Eigen::ArrayXd shifted =
            logits.row(s).array() - logits.row(s).maxCoeff();
        const Eigen::ArrayXd expd = shifted.exp();
        out.probs.row(s) = (expd / expd.sum()).matrix().transpose();
    }
    return out;
}

void npg_update(SoftmaxTabularPolicy& policy, const Eigen::MatrixXd& q, double eta,
                double gamma) {
    if (q.rows() != policy.logits.rows() || q.cols() != policy.logits.cols()) {
        throw std::invalid_argument("Q shape does not match the policy");
    }
    policy.logits += (eta / (1.0 - gamma)) * q;
}

double auto_slack(const TabularCMDP& cmdp, std::size_t T, double eps_dist) {
    const double m = std::max(cmdp.reward_max, cmdp.cost_max);
    const double size = double(cmdp.n_states * cmdp.n_actions);
    return 2.0 * std::sqrt(size / (std::pow(1.0 - cmdp.gamma, 3) * double(T))) *
           (eps_dist + 4.0 * m * m + 6.0 * m);
}

HarnessReport tabular_theorem_harness(const TabularCMDP& cmdp, std::size_t T,
                                      const HarnessConfig& cfg) {
    if (T == 0) throw std::invalid_argument("T must be positive");
    cmdp.validate();
    const double l = cmdp.cost_limit;
    const double h_plus = cfg.auto_slack ? auto_slack(cmdp, T, cfg.eps_dist)
                                         : cfg.band.h_plus0;
    const double h_minus = cfg.auto_slack ? 0.0 : cfg.band.h_minus0;
    const double eta =
        cfg.eta_scales_with_horizon ? cfg.eta / std::sqrt(double(T)) : cfg.eta;

    SoftmaxTabularPolicy theta =
        SoftmaxTabularPolicy::uniform(cmdp.n_states, cmdp.n_actions);
    HarnessReport report;
    report.iterations = T;
    report.h_plus = h_plus;
    report.optimal_v_r = solve_constrained_optimum(cmdp, l);

    Eigen::MatrixXd mixture = Eigen::MatrixXd::Zero(cmdp.n_states, cmdp.n_actions);
    double weight_sum = 0.0;
    TabularPolicy pi;
    for (std::size_t t = 0; t < T; ++t) {
        pi = theta.policy();
        const double v_r =
            value_under_initial_dist(cmdp, evaluate_values(cmdp, pi, Signal::Reward));
        const double v_c =
            value_under_initial_dist(cmdp, evaluate_values(cmdp, pi, Signal::Cost));
        const Eigen::MatrixXd q_r = evaluate_q(cmdp, pi, Signal::Reward);
        const Eigen::MatrixXd q_c = evaluate_q(cmdp, pi, Signal::Cost);

        HarnessIterate it;
        it.v_r = v_r;
        it.v_c = v_c;
        if (v_c <= l - h_minus) {
            it.region = Region::Safe;
            it.weight = 1.0;
            it.weight_halved = 1.0;
            npg_update(theta, q_r, eta, cmdp.gamma);
        } else if (v_c <= l + h_plus) {
            // Ascent surrogates in the NPG geometry: Q_r raises reward,
            // -Q_c lowers cost.
            const Eigen::VectorXd g_r =
                Eigen::Map<const Eigen::VectorXd>(q_r.data(), q_r.size()) /
                (1.0 - cmdp.gamma);
            const Eigen::VectorXd g_c =
                -Eigen::Map<const Eigen::VectorXd>(q_c.data(), q_c.size()) /
                (1.0 - cmdp.gamma);
            if (gradients_aligned(g_r, g_c)) {
                it.region = Region::Align;
                it.weight = 0.5;
                it.weight_halved = 0.5;
            } else {
                it.region = Region::Conflict;
                it.weight = 0.5 - g_r.dot(g_c) / g_r.squaredNorm();
                it.weight_halved = 0.5 - g_r.dot(g_c) / (2.0 * g_r.squaredNorm());
            }
            const Eigen::VectorXd combined = combine_gradients(g_r, g_c);
            const Eigen::MatrixXd step =
                Eigen::Map<const Eigen::MatrixXd>(combined.data(), q_r.rows(), q_r.cols());
            theta.logits += eta * step;
        } else {
            it.region = Region::Unsafe;
            it.weight = 0.0;
            it.weight_halved = 0.0;
            npg_update(theta, -q_c, eta, cmdp.gamma);
        }
        mixture += it.weight * pi.probs;
        weight_sum += it.weight;
        report.iterates.push_back(it);
    }

    pi = theta.policy();
    report.final_v_r =
        value_under_initial_dist(cmdp, evaluate_values(cmdp, pi, Signal::Reward));
    report.final_v_c =
        value_under_initial_dist(cmdp, evaluate_values(cmdp, pi, Signal::Cost));

    if (weight_sum <= 0.0) {
        report.degenerate = true;
        return report;
    }
    TabularPolicy weighted{mixture / weight_sum};
    weighted.validate();
    report.weighted_v_r =
        value_under_initial_dist(cmdp, evaluate_values(cmdp, weighted, Signal::Reward));
    report.weighted_v_c =
        value_under_initial_dist(cmdp, evaluate_values(cmdp, weighted, Signal::Cost));
    report.gap = report.optimal_v_r - report.weighted_v_r;
    report.violation = report.weighted_v_c - l;
    return report;
}

void save_harness_csv(const std::vector<HarnessReport>& reports,
                      const std::vector<std::size_t>& horizons, const std::string& path) {
    if (reports.size() != horizons.size()) {
        throw std::invalid_argument("one horizon per report required");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "T,gap,violation,weighted_v_r,weighted_v_c,final_v_r,final_v_c,optimal_v_r,"
           "degenerate\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const HarnessReport& r = reports[i];
        out << horizons[i] << ',' << r.gap << ',' << r.violation << ',' << r.weighted_v_r
            << ',' << r.weighted_v_c << ',' << r.final_v_r << ',' << r.final_v_c << ','
            << r.optimal_v_r << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
}

TabularCMDP four_state_cmdp() {
    TabularCMDP m;
    m.n_states = 4;
    m.n_actions = 2;
    m.gamma = 0.9;
    m.transition.assign(2, Eigen::MatrixXd::Zero(4, 4));
    for (Eigen::Index s = 0; s < 4; ++s) {
        const Eigen::Index down = std::max<Eigen::Index>(s - 1, 0);
        const Eigen::Index up = std::min<Eigen::Index>(s + 1, 3);
        m.transition[0](s, down) += 0.9;
        m.transition[0](s, s) += 0.1;
        m.transition[1](s, up) += 0.9;
        m.transition[1](s, s) += 0.1;
    }
    m.reward.resize(4, 2);
    m.reward << 0.1, 1.0, 0.1, 1.0, 0.1, 1.0, 0.1, 1.0;
    m.cost.resize(4, 2);
    m.cost << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0;
    m.initial_dist = Eigen::VectorXd::Zero(4);
    m.initial_dist[0] = 1.0;
    m.reward_max = 1.0;
    m.cost_max = 1.0;

    // Midway between the all-retreat and all-advance policies' costs.
    TabularPolicy retreat{Eigen::MatrixXd::Zero(4, 2)}, advance{Eigen::MatrixXd::Zero(4, 2)};
    retreat.probs.col(0).setOnes();
    advance.probs.col(1).setOnes();
    const double lo =
        value_under_initial_dist(m, evaluate_values(m, retreat, Signal::Cost));
    const double hi =
        value_under_initial_dist(m, evaluate_values(m, advance, Signal::Cost));
    m.cost_limit = 0.5 * (lo + hi);
    return m;
}

}  // namespace drcorl
