#pragma once

#include "drcorl/dataset.hpp"

namespace drcorl {

/// 1-d point mass on [-2, 2]. Actions are clipped to [-1, 1] and move the
/// mass by 0.1 a plus small process noise. Reward peaks at x = 0.9 inside
/// the safe region; cost is 1 whenever |x| > 1.
class PointMassEnv : public Env {
public:
    static constexpr double kXMin = -2.0;
    static constexpr double kXMax = 2.0;
    static constexpr double kStep = 0.1;
    static constexpr double kProcessNoise = 0.02;
    static constexpr double kRewardPeak = 0.9;
    static constexpr double kSafeRadius = 1.0;

    Eigen::Index state_dim() const override { return 1; }
    Eigen::Index action_dim() const override { return 1; }
    Eigen::VectorXd reset(Rng& rng) const override;
    Step step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
              Rng& rng) const override;

    static double reward_at(double x);
    static double cost_at(double x);
};

/// Noisy proportional controller steering toward `target`; the action noise
/// makes the resulting dataset cover a broad band of positions including
/// some beyond the safe radius.
BehaviorPolicyFn point_mass_controller(double target, double gain = 5.0,
                                       double action_noise = 0.6);

}  // namespace drcorl
