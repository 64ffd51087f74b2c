#include "drcorl/grad_manip.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace drcorl {

double gradient_angle_degrees(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c) {
    if (g_r.size() != g_c.size()) throw std::invalid_argument("gradient dimension mismatch");
    const double nr = g_r.norm();
    const double nc = g_c.norm();
    if (nr == 0.0 || nc == 0.0) return 0.0;
    const double cosine = std::clamp(g_r.dot(g_c) / (nr * nc), -1.0, 1.0);
    return std::acos(cosine) * 180.0 / std::numbers::pi;
}

bool gradients_aligned(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c) {
    if (g_r.size() != g_c.size()) throw std::invalid_argument("gradient dimension mismatch");
    return g_r.dot(g_c) >= 0.0;
}

Eigen::VectorXd project_out(const Eigen::VectorXd& g, const Eigen::VectorXd& onto) {
    const double n2 = onto.squaredNorm();
    if (n2 == 0.0) return g;
    return g - (g.dot(onto) / n2) * onto;
}

Eigen::VectorXd combine_gradients(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c) {
    if (g_r.size() != g_c.size()) throw std::invalid_argument("gradient dimension mismatch");
    if (gradients_aligned(g_r, g_c)) return 0.5 * (g_r + g_c);
    return 0.5 * (project_out(g_r, g_c) + project_out(g_c, g_r));
}

}  // namespace drcorl
