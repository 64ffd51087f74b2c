#include "drcorl/safe_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "drcorl/grad_manip.hpp"

namespace drcorl {

double SlackBand::h_plus(std::size_t step, std::size_t total) const {
    if (!decay || total == 0) return h_plus0;
    return std::max(0.0, h_plus0 * (1.0 - double(step) / double(total)));
}

double SlackBand::h_minus(std::size_t step, std::size_t total) const {
    if (!decay || total == 0) return h_minus0;
    return std::max(0.0, h_minus0 * (1.0 - double(step) / double(total)));
}

double BetaSchedule::value(std::size_t step, std::size_t total) const {
    if (kind == Kind::Constant || total == 0) return start;
    const double frac = std::min(1.0, double(step) / double(total));
    if (kind == Kind::Linear) return start + (end - start) * frac;
    return start + (end - start) * std::sqrt(frac);
}

BetaSchedule::Kind BetaSchedule::kind_from_name(const std::string& name) {
    if (name == "constant") return Kind::Constant;
    if (name == "linear") return Kind::Linear;
    if (name == "sqrt") return Kind::Sqrt;
    throw std::invalid_argument("unknown temperature schedule '" + name +
                                "' (constant|linear|sqrt)");
}

std::string to_string(Region region) {
    switch (region) {
        case Region::Safe: return "safe";
        case Region::Unsafe: return "unsafe";
        case Region::Align: return "align";
        case Region::Conflict: return "conflict";
    }
    return "?";
}

std::size_t RegionLog::count(Region region) const {
    return std::size_t(std::count_if(entries.begin(), entries.end(),
                                     [&](const RegionEntry& e) { return e.region == region; }));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> policy_gradients(
    const GaussianPolicy& policy, const CriticEnsemble& critics, const Denoiser& denoiser,
    const NoiseSchedule& schedule, const std::vector<Eigen::VectorXd>& states, double beta,
    std::size_t n_mc, Rng& rng) {
    if (states.empty() || n_mc == 0) throw std::invalid_argument("empty gradient batch");
    if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
    const double n = double(states.size() * n_mc);
    Eigen::VectorXd g_r = Eigen::VectorXd::Zero(policy.param_count());
    Eigen::VectorXd g_c = Eigen::VectorXd::Zero(policy.param_count());
    for (const Eigen::VectorXd& s : states) {
        for (std::size_t i = 0; i < n_mc; ++i) {
            const Eigen::VectorXd z = rng.normal_vector(policy.action_dim());
            const Eigen::VectorXd a = policy.sample_with_noise(s, z);
            const Eigen::VectorXd score = denoiser.score(schedule, a, 1, s);
            const Eigen::VectorXd reg = score / beta;
            policy.accumulate_action_grad(
                s, z, (critics.reward_q_grad_action(s, a) + reg) / n, g_r);
            policy.accumulate_action_grad(
                s, z, (-critics.ucb_cost_grad_action(s, a) + reg) / n, g_c);
        }
        const double entropy_coef = 1.0 / (beta * double(states.size()));
        policy.accumulate_entropy_grad(s, entropy_coef, g_r);
        policy.accumulate_entropy_grad(s, entropy_coef, g_c);
    }
    return {std::move(g_r), std::move(g_c)};
}

Eigen::VectorXd safe_adaptation(const GaussianPolicy& policy, const CriticEnsemble& critics,
                                const Denoiser& denoiser, const NoiseSchedule& schedule,
                                const TransitionDataset& dataset, double beta,
                                double h_plus, double h_minus, const SafeAdaptConfig& cfg,
                                Rng& rng, RegionEntry& entry) {
    const ActionSampler sampler = [&policy](const Eigen::VectorXd& s, Rng& r) {
        return policy.sample(s, r);
    };
    const EpisodicCostEstimate est =
        estimate_episodic_cost(critics, dataset, sampler, cfg.cost_batch, cfg.horizon,
                               critics.config().gamma, rng);
    entry.cost_estimate = est.episodic;

    std::vector<Eigen::VectorXd> states;
    states.reserve(cfg.policy_batch);
    for (std::size_t i = 0; i < cfg.policy_batch; ++i) {
        states.push_back(dataset[rng.index(dataset.size())].state);
    }
    auto [g_r, g_c] =
        policy_gradients(policy, critics, denoiser, schedule, states, beta, cfg.n_mc, rng);

    if (est.episodic <= cfg.cost_limit - h_minus) {
        entry.region = Region::Safe;
        entry.weight = 1.0;
        return g_r;
    }
    if (est.episodic <= cfg.cost_limit + h_plus) {
        if (gradients_aligned(g_r, g_c)) {
            entry.region = Region::Align;
            entry.weight = 0.5;
        } else {
            entry.region = Region::Conflict;
            entry.weight = 0.5 - g_r.dot(g_c) / g_r.squaredNorm();
        }
        return combine_gradients(g_r, g_c);
    }
    entry.region = Region::Unsafe;
    entry.weight = 0.0;
    return g_c;
}

TrainResult train(const Env& env, const TransitionDataset& dataset,
                  const Denoiser& denoiser, const NoiseSchedule& schedule,
                  CriticEnsemble& critics, GaussianPolicy& policy, const TrainConfig& cfg,
                  std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    Rng rng(seed);
    const double r_min = dataset.min_episodic_return();
    const double r_max = dataset.max_episodic_return();
    const ActionSampler sampler = [&policy](const Eigen::VectorXd& s, Rng& r) {
        return policy.sample(s, r);
    };
    const BehaviorPolicyFn mean_policy = [&policy](const Eigen::VectorXd& s, Rng&) {
        return policy.mean(s);
    };

    Adam opt(policy.param_count(), cfg.policy_adam);
    TrainResult result;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cfg.update_critics) {
            critics.train_reward_step(dataset, rng);
            critics.train_cost_step(dataset, sampler, rng);
        }
        const double beta = cfg.beta.value(step, cfg.steps);
        const double h_plus = cfg.band.h_plus(step, cfg.steps);
        const double h_minus = cfg.band.h_minus(step, cfg.steps);
        RegionEntry entry;
        entry.step = step;
        const Eigen::VectorXd g =
            safe_adaptation(policy, critics, denoiser, schedule, dataset, beta, h_plus,
                            h_minus, cfg.adapt, rng, entry);
        Eigen::VectorXd params = policy.flat_params();
        opt.step(params, -g);
        policy.set_flat_params(params);
        result.regions.entries.push_back(entry);

        if (cfg.eval_interval > 0 &&
            ((step + 1) % cfg.eval_interval == 0 || step + 1 == cfg.steps)) {
            double sum_return = 0.0, sum_cost = 0.0;
            for (std::size_t ep = 0; ep < cfg.eval_episodes; ++ep) {
                const EpisodeStats stats =
                    evaluate_episode(env, mean_policy, cfg.eval_horizon, rng);
                sum_return += stats.episodic_return;
                sum_cost += stats.episodic_cost;
            }
            MetricRow row;
            row.step = step + 1;
            row.normalized_return =
                normalized_return(sum_return / double(cfg.eval_episodes), r_min, r_max);
            row.normalized_cost = normalized_cost(sum_cost / double(cfg.eval_episodes),
                                                  0.0, cfg.adapt.cost_limit);
            row.region = entry.region;
            row.beta = beta;
            row.h_plus = h_plus;
            row.h_minus = h_minus;
            result.metrics.push_back(row);
        }
    }
    return result;
}

void save_metrics_csv(const std::vector<MetricRow>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "step,normalized_return,normalized_cost,region,beta,h_plus,h_minus\n";
    out << std::setprecision(17);
    for (const MetricRow& m : metrics) {
        out << m.step << ',' << m.normalized_return << ',' << m.normalized_cost << ','
            << to_string(m.region) << ',' << m.beta << ',' << m.h_plus << ',' << m.h_minus
            << '\n';
    }
}

void save_region_csv(const RegionLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "step,region,weight,cost_estimate\n";
    out << std::setprecision(17);
    for (const RegionEntry& e : log.entries) {
        out << e.step << ',' << to_string(e.region) << ',' << e.weight << ','
            << e.cost_estimate << '\n';
    }
}

}  // namespace drcorl
