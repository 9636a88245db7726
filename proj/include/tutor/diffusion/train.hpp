#pragma once

#include <vector>

#include "tutor/diffusion/denoiser.hpp"

namespace tutor::diffusion {

// One aligned training clip: fixed-length motion window plus conditioning and
// act encodings. seed_frames leading frames carry the reduced loss weight.
struct ClipSample {
    Eigen::MatrixXd motion;    // T x D_m
    Eigen::MatrixXd cond;      // T x cond_dim
    Eigen::VectorXd u;         // K one-hot
    Eigen::MatrixXd u_frames;  // T x K
    int act_index = 0;
    int seed_frames = 0;
};

struct TrainConfig {
    int steps = 2000;
    int batch_size = 8;
    double lr = 0.02;
    double momentum = 0.9;
    double lr_final_fraction = 0.01;  // cosine decay target
    double grad_clip = 5.0;           // global norm; <= 0 disables
    int checkpoint_every = 100;       // steps between in-memory last-good snapshots
    std::uint64_t seed = 0;
    bool check_gradients = false;     // finite-difference check before training
};

struct TrainHistory {
    std::vector<double> total;
    std::vector<double> diff;
    std::vector<double> act;
};

// Momentum SGD with cosine decay on the joint diffusion + act objective.
// Timesteps are drawn uniformly per sample. On a non-finite loss the last
// in-memory snapshot is restored and TrainingError is thrown.
TrainHistory train(Denoiser& denoiser, const std::vector<ClipSample>& dataset, const TrainConfig& cfg);

// Central-difference gradient verification over every trainable tensor.
// Returns the maximum relative error (relative to max(|a|,|b|,1e-2)).
double finite_difference_check(Denoiser& denoiser, const LossInput& input, double h = 1e-4);

LossInput make_loss_input(const Denoiser& denoiser, const ClipSample& clip, int s, Rng& rng);

}  // namespace tutor::diffusion
