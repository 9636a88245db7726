#include "tutor/diffusion/train.hpp"

#include <cmath>
#include <sstream>

namespace tutor::diffusion {

LossInput make_loss_input(const Denoiser& denoiser, const ClipSample& clip, int s, Rng& rng) {
    const auto& cfg = denoiser.config();
    const auto T = clip.motion.rows();
    LossInput in;
    in.s = s;
    in.cond = clip.cond;
    in.u = clip.u;
    in.u_frames = clip.u_frames;
    in.act_index = clip.act_index;
    in.eps_target.resize(T, cfg.motion_dim);
    for (Eigen::Index t = 0; t < T; ++t)
        for (int j = 0; j < cfg.motion_dim; ++j) in.eps_target(t, j) = rng.gaussian();
    in.x_s = forward_diffuse(clip.motion, s, in.eps_target, denoiser.schedule());
    in.frame_weights.resize(T);
    for (Eigen::Index t = 0; t < T; ++t)
        in.frame_weights(t) = t < clip.seed_frames ? cfg.seed_loss_weight : 1.0;
    return in;
}

TrainHistory train(Denoiser& denoiser, const std::vector<ClipSample>& dataset, const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    Rng rng(derive_seed(cfg.seed, "diffusion-train"));

    if (cfg.check_gradients) {
        Rng check_rng(derive_seed(cfg.seed, "diffusion-gradcheck"));
        const int s = static_cast<int>(check_rng.uniform_index(
            static_cast<std::uint64_t>(denoiser.config().schedule_steps)));
        LossInput in = make_loss_input(denoiser, dataset[0], s, check_rng);
        const double err = finite_difference_check(denoiser, in);
        if (err > 1e-4)
            throw TrainingError("train: gradient check failed, max relative error " +
                                std::to_string(err));
    }

    auto params = denoiser.parameters();
    std::vector<Eigen::MatrixXd> velocity;
    std::vector<Eigen::MatrixXd> snapshot;
    velocity.reserve(params.size());
    snapshot.reserve(params.size());
    for (auto* p : params) {
        velocity.push_back(Eigen::MatrixXd::Zero(p->v.rows(), p->v.cols()));
        snapshot.push_back(p->v);
    }

    TrainHistory hist;
    const int S = denoiser.config().schedule_steps;
    for (int step = 0; step < cfg.steps; ++step) {
        denoiser.zero_grad();
        LossValue acc;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& clip = dataset[rng.uniform_index(dataset.size())];
            const int s = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(S)));
            LossInput in = make_loss_input(denoiser, clip, s, rng);
            const LossValue lv = denoiser.loss_and_grad(in, true);
            acc.total += lv.total;
            acc.diff += lv.diff;
            acc.act += lv.act;
        }
        const double inv_b = 1.0 / cfg.batch_size;
        acc.total *= inv_b;
        acc.diff *= inv_b;
        acc.act *= inv_b;
        hist.total.push_back(acc.total);
        hist.diff.push_back(acc.diff);
        hist.act.push_back(acc.act);

        if (!std::isfinite(acc.total)) {
            for (std::size_t i = 0; i < params.size(); ++i) params[i]->v = snapshot[i];
            std::ostringstream msg;
            msg << "train: non-finite loss at step " << step << "; restored snapshot from step "
                << (step / cfg.checkpoint_every) * cfg.checkpoint_every;
            throw TrainingError(msg.str());
        }

        double gnorm2 = 0.0;
        for (auto* p : params) {
            p->g *= inv_b;
            gnorm2 += p->g.squaredNorm();
        }
        if (cfg.grad_clip > 0.0) {
            const double gnorm = std::sqrt(gnorm2);
            if (gnorm > cfg.grad_clip) {
                const double scale = cfg.grad_clip / gnorm;
                for (auto* p : params) p->g *= scale;
            }
        }

        const double progress = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 0.0;
        const double lr = cfg.lr * (cfg.lr_final_fraction +
                                    (1.0 - cfg.lr_final_fraction) * 0.5 * (1.0 + std::cos(M_PI * progress)));
        for (std::size_t i = 0; i < params.size(); ++i) {
            velocity[i] = cfg.momentum * velocity[i] - lr * params[i]->g;
            params[i]->v += velocity[i];
        }

        if ((step + 1) % cfg.checkpoint_every == 0)
            for (std::size_t i = 0; i < params.size(); ++i) snapshot[i] = params[i]->v;
    }
    return hist;
}

double finite_difference_check(Denoiser& denoiser, const LossInput& input, double h) {
    denoiser.zero_grad();
    denoiser.loss_and_grad(input, true);
    std::vector<Eigen::MatrixXd> analytic;
    auto params = denoiser.parameters();
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->g);

    double max_err = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = *params[i];
        for (Eigen::Index r = 0; r < t.v.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.v.cols(); ++c) {
                const double orig = t.v(r, c);
                t.v(r, c) = orig + h;
                const double lp = denoiser.loss_and_grad(input, false).total;
                t.v(r, c) = orig - h;
                const double lm = denoiser.loss_and_grad(input, false).total;
                t.v(r, c) = orig;
                const double fd = (lp - lm) / (2.0 * h);
                const double an = analytic[i](r, c);
                const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-2});
                max_err = std::max(max_err, err);
            }
        }
    }
    return max_err;
}

}  // namespace tutor::diffusion
