#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcorl/dataset.hpp"
#include "drcorl/mlp.hpp"
#include "drcorl/rng.hpp"

namespace drcorl {

/// Discrete variance-preserving schedule. Entries are indexed by timestep
/// t in [1, T]; alpha_bar(t) = prod_{i<=t} alpha(i), beta_bar(t) = 1 - alpha_bar(t).
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> betas);

    static NoiseSchedule constant(int T, double beta = 0.02);
    static NoiseSchedule sqrt_growth(int T, double scale = 0.01);
    static NoiseSchedule linear_growth(int T, double slope = 0.01, double intercept = 0.04);
    /// schedule kind by config name: constant | sqrt | linear.
    static NoiseSchedule from_name(const std::string& name, int T);

    int steps() const { return int(beta_.size()); }
    double beta(int t) const { return beta_.at(t - 1); }
    double alpha(int t) const { return 1.0 - beta(t); }
    double alpha_bar(int t) const { return alpha_bar_.at(t - 1); }
    double beta_bar(int t) const { return 1.0 - alpha_bar(t); }

private:
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

struct NoisedAction {
    Eigen::VectorXd noised;  // sqrt(alpha_bar_t) a0 + sqrt(beta_bar_t) eps
    Eigen::VectorXd eps;
};

NoisedAction noise_action(const NoiseSchedule& schedule, const Eigen::VectorXd& a0, int t,
                          Rng& rng);

/// Noise-prediction network eps_psi(a_t, t | s). Timestep conditioning is
/// t/T plus one sinusoidal pair appended to the [action, state] input.
class Denoiser {
public:
    Denoiser() = default;
    Denoiser(Eigen::Index action_dim, Eigen::Index state_dim,
             std::vector<Eigen::Index> hidden, int T, Rng& rng);

    Eigen::Index action_dim() const { return action_dim_; }
    Eigen::Index state_dim() const { return state_dim_; }
    int steps() const { return T_; }

    Eigen::VectorXd predict(const Eigen::VectorXd& noised_action, int t,
                            const Eigen::VectorXd& state) const;

    /// Score of the noised marginal: -eps_psi(a, t | s) / sqrt(beta_bar_t).
    /// Throws when beta_bar_t vanishes (the score is undefined there).
    Eigen::VectorXd score(const NoiseSchedule& schedule, const Eigen::VectorXd& action,
                          int t, const Eigen::VectorXd& state) const;

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    Eigen::VectorXd embed(const Eigen::VectorXd& noised_action, int t,
                          const Eigen::VectorXd& state) const;

    void save(const std::string& path) const;
    static Denoiser load(const std::string& path);

private:
    Eigen::Index action_dim_ = 0;
    Eigen::Index state_dim_ = 0;
    int T_ = 0;
    Mlp net_;
};

using TimeWeightFn = std::function<double(int t)>;

struct DiffusionTrainConfig {
    std::size_t steps = 20000;
    std::size_t batch_size = 256;
    Adam::Config adam{};
    TimeWeightFn weight = nullptr;  // defaults to w(t) = 1
};

/// Minimizes the denoising regression loss over the dataset. Returns the
/// per-step loss curve. Deterministic for a fixed rng state.
std::vector<double> train_denoiser(const TransitionDataset& dataset,
                                   const NoiseSchedule& schedule, Denoiser& denoiser,
                                   const DiffusionTrainConfig& cfg, Rng& rng);

struct ActionBox {
    double lo = -1.0;
    double hi = 1.0;
};

/// Ancestral sampling from x_T ~ N(0, I) down to x_0; the noise term is
/// dropped at the final step. Clips to the action box when given.
Eigen::VectorXd reverse_sample(const Denoiser& denoiser, const NoiseSchedule& schedule,
                               const Eigen::VectorXd& state, Rng& rng,
                               const ActionBox* box = nullptr);

}  // namespace drcorl
