#include "tutor/diffusion/sample.hpp"

#include <cmath>

namespace tutor::diffusion {

namespace {

Eigen::MatrixXd randn(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

}  // namespace

Eigen::MatrixXd sample(const Denoiser& denoiser, const Eigen::MatrixXd& cond, const Eigen::VectorXd& u,
                       const Eigen::MatrixXd& u_frames, const std::optional<SeedPrefix>& seed,
                       int infer_steps, Rng& rng) {
    const auto& cfg = denoiser.config();
    const auto& sch = denoiser.schedule();
    const int S = sch.steps();
    if (infer_steps < 1 || infer_steps > S)
        throw std::invalid_argument("sample: infer_steps must be in [1, schedule steps]");
    const auto T = cond.rows();
    const int Dm = cfg.motion_dim;

    Eigen::Index seed_rows = 0;
    if (seed) {
        seed_rows = seed->frames.rows();
        if (seed_rows >= T || seed->frames.cols() != Dm)
            throw std::invalid_argument("sample: seed prefix must be T0 x D_m with T0 < T");
    }

    // evenly spaced timesteps over [0, S-1], descending
    std::vector<int> taus(static_cast<std::size_t>(infer_steps));
    for (int i = 0; i < infer_steps; ++i)
        taus[static_cast<std::size_t>(i)] =
            infer_steps == 1 ? S - 1
                             : static_cast<int>(std::lround(static_cast<double>(i) * (S - 1) /
                                                            (infer_steps - 1)));

    Eigen::MatrixXd x = randn(T, Dm, rng);
    for (int i = infer_steps - 1; i >= 0; --i) {
        const int s = taus[static_cast<std::size_t>(i)];
        const int prev = i > 0 ? taus[static_cast<std::size_t>(i - 1)] : -1;
        const DenoiserOutput out = denoiser.forward(x, s, cond, u, u_frames);

        const double ab = sch.alpha_bar(s);
        const Eigen::MatrixXd x0_hat = (x - std::sqrt(1.0 - ab) * out.eps_hat) / std::sqrt(ab);
        if (prev < 0) {
            x = x0_hat;
        } else {
            const double abp = sch.alpha_bar(prev);
            const double sigma2 = (1.0 - abp) / (1.0 - ab) * (1.0 - ab / abp);
            const double dir = std::sqrt(std::max(0.0, 1.0 - abp - sigma2));
            x = std::sqrt(abp) * x0_hat + dir * out.eps_hat;
            if (sigma2 > 0.0) x += std::sqrt(sigma2) * randn(T, Dm, rng);
        }

        if (seed_rows > 0) {
            if (prev < 0) {
                x.topRows(seed_rows) = seed->frames;
            } else {
                const Eigen::MatrixXd noise = randn(seed_rows, Dm, rng);
                x.topRows(seed_rows) = forward_diffuse(seed->frames, prev, noise, sch);
            }
        }
    }
    return x;
}

}  // namespace tutor::diffusion
