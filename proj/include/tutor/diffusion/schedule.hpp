#pragma once

#include <Eigen/Dense>

#include "tutor/common.hpp"

namespace tutor::diffusion {

// DDPM variance schedule: beta_s in (0,1), alpha_s = 1 - beta_s,
// alpha_bar_s = prod alpha. alpha_bar is strictly decreasing.
struct NoiseSchedule {
    Eigen::VectorXd beta;
    Eigen::VectorXd alpha;
    Eigen::VectorXd alpha_bar;

    int steps() const { return static_cast<int>(beta.size()); }

    static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);
};

// x_s = sqrt(alpha_bar_s) x0 + sqrt(1 - alpha_bar_s) noise
Eigen::MatrixXd forward_diffuse(const Eigen::MatrixXd& x0, int s, const Eigen::MatrixXd& noise,
                                const NoiseSchedule& schedule);

}  // namespace tutor::diffusion
