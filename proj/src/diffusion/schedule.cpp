#include "tutor/diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace tutor::diffusion {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw std::invalid_argument("NoiseSchedule: steps must be >= 1");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
        throw std::invalid_argument("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule sch;
    sch.beta.resize(steps);
    sch.alpha.resize(steps);
    sch.alpha_bar.resize(steps);
    double prod = 1.0;
    for (int s = 0; s < steps; ++s) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
        sch.beta(s) = beta_start + (beta_end - beta_start) * t;
        sch.alpha(s) = 1.0 - sch.beta(s);
        prod *= sch.alpha(s);
        sch.alpha_bar(s) = prod;
    }
    return sch;
}

Eigen::MatrixXd forward_diffuse(const Eigen::MatrixXd& x0, int s, const Eigen::MatrixXd& noise,
                                const NoiseSchedule& schedule) {
    if (s < 0 || s >= schedule.steps()) throw std::out_of_range("forward_diffuse: step out of range");
    if (noise.rows() != x0.rows() || noise.cols() != x0.cols())
        throw std::invalid_argument("forward_diffuse: noise shape mismatch");
    const double ab = schedule.alpha_bar(s);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

}  // namespace tutor::diffusion
