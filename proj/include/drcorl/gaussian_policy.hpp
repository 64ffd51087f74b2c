#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcorl/mlp.hpp"
#include "drcorl/rng.hpp"

namespace drcorl {

/// Diagonal-covariance policy classes: a state-dependent std head, a
/// state-independent learnable std, or a frozen near-Dirac std.
enum class CovarianceMode { StateDependent, Constant, NearDirac };

CovarianceMode covariance_mode_from_name(const std::string& name);
std::string to_string(CovarianceMode mode);

/// pi_theta(a|s) = N(a; m_theta(s), diag(sigma_theta(s)^2)). Parameters are
/// exposed as one flat vector: mean-net parameters first, then the std
/// parameters (std-net weights, per-dim log-std, or nothing).
class GaussianPolicy {
public:
    GaussianPolicy() = default;
    GaussianPolicy(Eigen::Index state_dim, Eigen::Index action_dim,
                   std::vector<Eigen::Index> hidden, CovarianceMode mode, Rng& rng,
                   double init_sigma = 0.2);

    Eigen::Index state_dim() const { return state_dim_; }
    Eigen::Index action_dim() const { return action_dim_; }
    CovarianceMode mode() const { return mode_; }

    Eigen::VectorXd mean(const Eigen::VectorXd& state) const;
    Eigen::VectorXd stddev(const Eigen::VectorXd& state) const;

    /// 0.5 log det Sigma + (d/2) log 2pi + d/2, in closed form.
    double entropy(const Eigen::VectorXd& state) const;

    double log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;

    Eigen::VectorXd sample(const Eigen::VectorXd& state, Rng& rng) const;
    /// Reparameterized: m(s) + sigma(s) .* z.
    Eigen::VectorXd sample_with_noise(const Eigen::VectorXd& state,
                                      const Eigen::VectorXd& z) const;

    Eigen::Index param_count() const;
    Eigen::VectorXd flat_params() const;
    void set_flat_params(const Eigen::VectorXd& flat);

    /// Adds upstream . d a(theta; s, z) / d theta to grad, where
    /// a = m(s) + sigma(s) .* z.
    void accumulate_action_grad(const Eigen::VectorXd& state, const Eigen::VectorXd& z,
                                const Eigen::VectorXd& upstream, Eigen::VectorXd& grad) const;

    /// Adds coef * d entropy(s) / d theta to grad. This is the
    /// 0.5 grad log det Sigma term; it vanishes for NearDirac and touches
    /// only std parameters otherwise.
    void accumulate_entropy_grad(const Eigen::VectorXd& state, double coef,
                                 Eigen::VectorXd& grad) const;

    using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& action,
                                                  const Eigen::VectorXd& state)>;

    /// Monte-Carlo gradient of D_KL(pi_theta || mu) where grad_a log mu is
    /// supplied by score. n_mc reparameterized draws.
    Eigen::VectorXd reverse_kl_grad(const ScoreFn& score, const Eigen::VectorXd& state,
                                    std::size_t n_mc, Rng& rng) const;

    void save(const std::string& path) const;
    static GaussianPolicy load(const std::string& path);

private:
    Eigen::Index state_dim_ = 0;
    Eigen::Index action_dim_ = 0;
    CovarianceMode mode_ = CovarianceMode::Constant;
    Mlp mean_net_;
    Mlp std_net_;               // StateDependent only, outputs pre-softplus
    Eigen::VectorXd log_std_;   // Constant only
    double dirac_sigma_ = 1e-3;

    Eigen::VectorXd std_pre(const Eigen::VectorXd& state) const;  // StateDependent head
};

}  // namespace drcorl
