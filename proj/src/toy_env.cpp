#include "drcorl/toy_env.hpp"

#include <algorithm>
#include <cmath>

namespace drcorl {

Eigen::VectorXd PointMassEnv::reset(Rng& rng) const {
    Eigen::VectorXd s(1);
    s[0] = rng.uniform(-0.2, 0.2);
    return s;
}

double PointMassEnv::reward_at(double x) {
    const double d = x - kRewardPeak;
    return std::max(0.0, 1.0 - d * d);
}

double PointMassEnv::cost_at(double x) { return std::abs(x) > kSafeRadius ? 1.0 : 0.0; }

Env::Step PointMassEnv::step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                             Rng& rng) const {
    const double a = std::clamp(action[0], -1.0, 1.0);
    const double x =
        std::clamp(state[0] + kStep * a + kProcessNoise * rng.normal(), kXMin, kXMax);
    Step out;
    out.next_state = Eigen::VectorXd::Constant(1, x);
    out.reward = reward_at(x);
    out.cost = cost_at(x);
    return out;
}

BehaviorPolicyFn point_mass_controller(double target, double gain, double action_noise) {
    return [=](const Eigen::VectorXd& state, Rng& rng) {
        const double a =
            std::clamp(gain * (target - state[0]), -1.0, 1.0) + action_noise * rng.normal();
        return Eigen::VectorXd::Constant(1, std::clamp(a, -1.0, 1.0));
    };
}

}  // namespace drcorl
