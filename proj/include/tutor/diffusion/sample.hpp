#pragma once

#include <optional>

#include "tutor/diffusion/denoiser.hpp"

namespace tutor::diffusion {

struct SeedPrefix {
    Eigen::MatrixXd frames;  // T0 x D_m, T0 < T
};

// Ancestral sampling over a strided subset of the training schedule
// (S_infer <= S). With a seed prefix the seed region is overwritten with the
// forward-diffused prefix at every step and with the clean prefix at the end.
// Deterministic given the RNG.
Eigen::MatrixXd sample(const Denoiser& denoiser, const Eigen::MatrixXd& cond, const Eigen::VectorXd& u,
                       const Eigen::MatrixXd& u_frames, const std::optional<SeedPrefix>& seed,
                       int infer_steps, Rng& rng);

}  // namespace tutor::diffusion
