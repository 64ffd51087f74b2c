#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drcorl/critics.hpp"
#include "drcorl/dataset.hpp"
#include "drcorl/diffusion.hpp"
#include "drcorl/gaussian_policy.hpp"
#include "drcorl/rng.hpp"

namespace drcorl {

/// Slack zone around the cost limit; inside it the reward and cost gradients
/// are blended instead of optimizing one signal alone. Values linearly decay
/// to zero over training when decay is enabled.
struct SlackBand {
    double h_plus0 = 0.2;
    double h_minus0 = 0.2;
    bool decay = true;

    double h_plus(std::size_t step, std::size_t total) const;
    double h_minus(std::size_t step, std::size_t total) const;
};

/// Temperature 1/beta on the regularizer. The default ramps beta linearly
/// from 0.04 to 1.0 so early training stays close to the behavioral policy
/// and late training trusts the critics more.
struct BetaSchedule {
    enum class Kind { Constant, Linear, Sqrt };
    Kind kind = Kind::Linear;
    double start = 0.04;
    double end = 1.0;

    double value(std::size_t step, std::size_t total) const;
    static Kind kind_from_name(const std::string& name);
};

enum class Region { Safe, Unsafe, Align, Conflict };
std::string to_string(Region region);

struct RegionEntry {
    std::size_t step = 0;
    Region region = Region::Safe;
    double weight = 0.0;          // mixture weight w_t for this iterate
    double cost_estimate = 0.0;   // episodic-cost estimate the branch used
};

struct RegionLog {
    std::vector<RegionEntry> entries;
    std::size_t count(Region region) const;
};

/// Monte-Carlo ascent gradients for the regularized objectives: the reward
/// gradient follows grad_a Q_r plus (1/beta) times the behavioral score, the
/// cost gradient follows -grad_a Q_c^UCB plus the same regularizer. Actions
/// are reparameterized a = m(s) + sigma(s) z; the score is taken at the
/// smallest diffusion timestep.
std::pair<Eigen::VectorXd, Eigen::VectorXd> policy_gradients(
    const GaussianPolicy& policy, const CriticEnsemble& critics, const Denoiser& denoiser,
    const NoiseSchedule& schedule, const std::vector<Eigen::VectorXd>& states, double beta,
    std::size_t n_mc, Rng& rng);

struct SafeAdaptConfig {
    double cost_limit = 10.0;
    double horizon = 200.0;       // episode length L for the episodic estimate
    std::size_t cost_batch = 256; // states sampled for the episodic estimate
    std::size_t policy_batch = 32;
    std::size_t n_mc = 4;
};

/// One region-switched gradient: reward branch below l - h^-, blended branch
/// inside the slack band, cost branch above l + h^+ (boundaries inclusive
/// toward the safer branch). Returns the ascent direction and logs the region.
Eigen::VectorXd safe_adaptation(const GaussianPolicy& policy, const CriticEnsemble& critics,
                                const Denoiser& denoiser, const NoiseSchedule& schedule,
                                const TransitionDataset& dataset, double beta,
                                double h_plus, double h_minus, const SafeAdaptConfig& cfg,
                                Rng& rng, RegionEntry& entry);

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t eval_interval = 200;
    std::size_t eval_episodes = 5;
    std::size_t eval_horizon = 200;
    bool update_critics = true;
    SlackBand band;
    BetaSchedule beta;
    SafeAdaptConfig adapt;
    Adam::Config policy_adam{};
};

struct MetricRow {
    std::size_t step = 0;
    double normalized_return = 0.0;
    double normalized_cost = 0.0;
    Region region = Region::Safe;
    double beta = 0.0;
    double h_plus = 0.0;
    double h_minus = 0.0;
};

struct TrainResult {
    RegionLog regions;
    std::vector<MetricRow> metrics;
};

/// Full training loop: per step, optionally update the critics on a
/// mini-batch, compute the region-switched gradient, and ascend the policy
/// parameters. Evaluation rollouts use the policy mean. Deterministic for a
/// fixed seed.
TrainResult train(const Env& env, const TransitionDataset& dataset,
                  const Denoiser& denoiser, const NoiseSchedule& schedule,
                  CriticEnsemble& critics, GaussianPolicy& policy, const TrainConfig& cfg,
                  std::uint64_t seed);

void save_metrics_csv(const std::vector<MetricRow>& metrics, const std::string& path);
void save_region_csv(const RegionLog& log, const std::string& path);

}  // namespace drcorl
