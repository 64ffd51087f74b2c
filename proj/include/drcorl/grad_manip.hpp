#pragma once

#include <Eigen/Dense>

namespace drcorl {

/// Angle between two gradients in degrees, in [0, 180]. Zero vectors are
/// classified as aligned (angle 0) by convention.
double gradient_angle_degrees(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c);

/// True when the gradients do not conflict (<g_r, g_c> >= 0, i.e. angle
/// < 90 degrees). The branch test is done in cosine space so the boundary is
/// exact; zero vectors count as aligned.
bool gradients_aligned(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c);

/// Projection of g onto the orthogonal complement of onto:
/// g - (<g, onto> / ||onto||^2) onto. Returns g unchanged if onto is zero.
Eigen::VectorXd project_out(const Eigen::VectorXd& g, const Eigen::VectorXd& onto);

/// Combination rule: (g_r + g_c)/2 when aligned, otherwise the average of
/// the two mutual orthogonal-complement projections.
Eigen::VectorXd combine_gradients(const Eigen::VectorXd& g_r, const Eigen::VectorXd& g_c);

}  // namespace drcorl
