#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tutor/common.hpp"
#include "tutor/diffusion/schedule.hpp"

namespace tutor::diffusion {

struct DenoiserConfig {
    int motion_dim = 684;   // D_m (configurable; 8 at desk scale)
    int cond_dim = 1434;    // concatenated audio+text feature width
    int num_acts = 8;       // K
    int latent_dim = 64;    // d
    int heads = 4;
    int blocks = 2;
    int window = 8;         // attention window, both self and cross
    int max_frames = 256;   // positional encoding table size
    int schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    double lambda_c = 1.0;     // clip-level act conditioning gain
    double lambda_f = 0.5;     // frame-level act conditioning gain
    double lambda_act = 0.1;   // auxiliary act-classification weight
    double seed_loss_weight = 0.1;  // diffusion loss weight on seed frames

    nlohmann::json to_json() const;
    static DenoiserConfig from_json(const nlohmann::json& j);
};

// Named trainable tensor with its gradient accumulator.
struct Tensor {
    std::string name;
    Eigen::MatrixXd v;
    Eigen::MatrixXd g;

    Tensor() = default;
    Tensor(std::string n, int rows, int cols) : name(std::move(n)), v(rows, cols), g(rows, cols) {
        v.setZero();
        g.setZero();
    }
};

struct DenoiserOutput {
    Eigen::MatrixXd eps_hat;     // T x D_m
    Eigen::VectorXd act_logits;  // K
};

// A full training example at a fixed noise level (used by loss_and_grad and
// the finite-difference checks).
struct LossInput {
    Eigen::MatrixXd x_s;         // T x D_m, already noised
    int s = 0;                   // diffusion timestep
    Eigen::MatrixXd cond;        // T x cond_dim
    Eigen::VectorXd u;           // K, clip-level one-hot
    Eigen::MatrixXd u_frames;    // T x K, frame-level schedule
    int act_index = 0;           // clip label for the auxiliary head
    Eigen::MatrixXd eps_target;  // T x D_m, the injected noise
    Eigen::VectorXd frame_weights;  // T, 1 for non-seed frames, seed_loss_weight for seed
};

struct LossValue {
    double total = 0.0;
    double diff = 0.0;
    double act = 0.0;
};

// Transformer denoiser over frame tokens. Motion, conditioning, act and
// timestep inputs all project into a shared latent of width d; act vectors are
// injected additively (scaled by lambda_c / lambda_f); each block applies
// windowed self-attention, windowed cross-attention to the conditioning
// tokens, and a feed-forward layer, all pre-norm residual. The act head reads
// the temporal mean of the final latents. Epsilon-prediction output.
class Denoiser {
  public:
    explicit Denoiser(const DenoiserConfig& cfg);

    const DenoiserConfig& config() const { return cfg_; }
    const NoiseSchedule& schedule() const { return schedule_; }

    void init_params(Rng& rng);

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    void zero_grad();

    // Forward pass only; safe on a const denoiser for inference.
    DenoiserOutput forward(const Eigen::MatrixXd& x_s, int s, const Eigen::MatrixXd& cond,
                           const Eigen::VectorXd& u, const Eigen::MatrixXd& u_frames) const;

    // Forward + loss; if accumulate_grads, runs backprop and adds parameter
    // gradients (does not zero them first).
    LossValue loss_and_grad(const LossInput& in, bool accumulate_grads);

    void save(const std::string& path) const;
    static Denoiser load(const std::string& path);

  private:
    struct Layers;
    DenoiserConfig cfg_;
    NoiseSchedule schedule_;
    std::vector<Tensor> params_;
    // index bookkeeping into params_; see denoiser.cpp
    struct Index;

    Eigen::MatrixXd positional_encoding(int T) const;

    friend struct DenoiserDetail;
};

}  // namespace tutor::diffusion
