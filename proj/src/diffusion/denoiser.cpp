#include "tutor/diffusion/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace tutor::diffusion {

nlohmann::json DenoiserConfig::to_json() const {
    return {{"motion_dim", motion_dim},
            {"cond_dim", cond_dim},
            {"num_acts", num_acts},
            {"latent_dim", latent_dim},
            {"heads", heads},
            {"blocks", blocks},
            {"window", window},
            {"max_frames", max_frames},
            {"schedule_steps", schedule_steps},
            {"beta_start", beta_start},
            {"beta_end", beta_end},
            {"lambda_c", lambda_c},
            {"lambda_f", lambda_f},
            {"lambda_act", lambda_act},
            {"seed_loss_weight", seed_loss_weight}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.motion_dim = j.at("motion_dim").get<int>();
    c.cond_dim = j.at("cond_dim").get<int>();
    c.num_acts = j.at("num_acts").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.blocks = j.at("blocks").get<int>();
    c.window = j.at("window").get<int>();
    c.max_frames = j.at("max_frames").get<int>();
    c.schedule_steps = j.at("schedule_steps").get<int>();
    c.beta_start = j.at("beta_start").get<double>();
    c.beta_end = j.at("beta_end").get<double>();
    c.lambda_c = j.at("lambda_c").get<double>();
    c.lambda_f = j.at("lambda_f").get<double>();
    c.lambda_act = j.at("lambda_act").get<double>();
    c.seed_loss_weight = j.at("seed_loss_weight").get<double>();
    return c;
}

namespace {

constexpr double kLnEps = 1e-5;

// tanh-approximated GELU; smooth, so finite-difference checks are clean
double gelu(double x) {
    const double c = std::sqrt(2.0 / M_PI);
    const double u = c * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
    const double c = std::sqrt(2.0 / M_PI);
    const double u = c * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

struct LnCache {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd inv_std;
};

Eigen::MatrixXd ln_forward(const Eigen::MatrixXd& x, const Tensor& g, const Tensor& b, LnCache& cache) {
    const auto T = x.rows();
    const auto d = x.cols();
    cache.xhat.resize(T, d);
    cache.inv_std.resize(T);
    Eigen::MatrixXd y(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double mu = x.row(t).mean();
        const double var = (x.row(t).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.inv_std(t) = inv;
        cache.xhat.row(t) = (x.row(t).array() - mu) * inv;
        y.row(t) = cache.xhat.row(t).cwiseProduct(g.v.row(0)) + b.v.row(0);
    }
    return y;
}

Eigen::MatrixXd ln_backward(const Eigen::MatrixXd& dy, const LnCache& cache, Tensor& g, Tensor& b) {
    const auto T = dy.rows();
    const auto d = dy.cols();
    Eigen::MatrixXd dx(T, d);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::RowVectorXd dxhat = dy.row(t).cwiseProduct(g.v.row(0));
        g.g.row(0) += dy.row(t).cwiseProduct(cache.xhat.row(t));
        b.g.row(0) += dy.row(t);
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(cache.xhat.row(t)).mean();
        dx.row(t) =
            cache.inv_std(t) * (dxhat.array() - m1 - cache.xhat.row(t).array() * m2).matrix();
    }
    return dx;
}

struct AttnCache {
    Eigen::MatrixXd Q, K, V, O;           // T x d / Tk x d
    std::vector<Eigen::MatrixXd> A;       // per head, T x Tk, zero outside window
};

// Windowed multi-head attention: query token t attends to key tokens in
// [t - window, t + window] only; out-of-window keys are never touched, so
// locality is exact.
Eigen::MatrixXd attn_forward(const Eigen::MatrixXd& xq, const Eigen::MatrixXd& xkv, int heads, int window,
                             const Tensor& Wq, const Tensor& Wk, const Tensor& Wv, const Tensor& Wo,
                             AttnCache& cache) {
    const auto T = xq.rows();
    const auto Tk = xkv.rows();
    const auto d = xq.cols();
    const auto dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.Q = xq * Wq.v;
    cache.K = xkv * Wk.v;
    cache.V = xkv * Wv.v;
    cache.O.setZero(T, d);
    cache.A.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd::Zero(T, Tk));

    for (int h = 0; h < heads; ++h) {
        const auto col = h * dh;
        auto& A = cache.A[static_cast<std::size_t>(h)];
        for (Eigen::Index t = 0; t < T; ++t) {
            const Eigen::Index lo = std::max<Eigen::Index>(0, t - window);
            const Eigen::Index hi = std::min<Eigen::Index>(Tk - 1, t + window);
            if (lo > hi) continue;
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index k = lo; k <= hi; ++k) {
                const double s =
                    scale * cache.Q.row(t).segment(col, dh).dot(cache.K.row(k).segment(col, dh));
                A(t, k) = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (Eigen::Index k = lo; k <= hi; ++k) {
                A(t, k) = std::exp(A(t, k) - mx);
                z += A(t, k);
            }
            for (Eigen::Index k = lo; k <= hi; ++k) {
                A(t, k) /= z;
                cache.O.row(t).segment(col, dh) += A(t, k) * cache.V.row(k).segment(col, dh);
            }
        }
    }
    return cache.O * Wo.v;
}

// Returns (d_xq, d_xkv).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> attn_backward(const Eigen::MatrixXd& xq,
                                                          const Eigen::MatrixXd& xkv,
                                                          const Eigen::MatrixXd& dout, int heads,
                                                          int window, Tensor& Wq, Tensor& Wk, Tensor& Wv,
                                                          Tensor& Wo, const AttnCache& cache) {
    const auto T = xq.rows();
    const auto Tk = xkv.rows();
    const auto d = xq.cols();
    const auto dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Wo.g += cache.O.transpose() * dout;
    const Eigen::MatrixXd dO = dout * Wo.v.transpose();

    Eigen::MatrixXd dQ = Eigen::MatrixXd::Zero(T, d);
    Eigen::MatrixXd dK = Eigen::MatrixXd::Zero(Tk, d);
    Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(Tk, d);

    for (int h = 0; h < heads; ++h) {
        const auto col = h * dh;
        const auto& A = cache.A[static_cast<std::size_t>(h)];
        for (Eigen::Index t = 0; t < T; ++t) {
            const Eigen::Index lo = std::max<Eigen::Index>(0, t - window);
            const Eigen::Index hi = std::min<Eigen::Index>(Tk - 1, t + window);
            if (lo > hi) continue;
            double dot = 0.0;  // sum_j A(t,j) dA(t,j)
            Eigen::VectorXd dA(hi - lo + 1);
            for (Eigen::Index k = lo; k <= hi; ++k) {
                dA(k - lo) = dO.row(t).segment(col, dh).dot(cache.V.row(k).segment(col, dh));
                dV.row(k).segment(col, dh) += A(t, k) * dO.row(t).segment(col, dh);
                dot += A(t, k) * dA(k - lo);
            }
            for (Eigen::Index k = lo; k <= hi; ++k) {
                const double dS = A(t, k) * (dA(k - lo) - dot);
                dQ.row(t).segment(col, dh) += scale * dS * cache.K.row(k).segment(col, dh);
                dK.row(k).segment(col, dh) += scale * dS * cache.Q.row(t).segment(col, dh);
            }
        }
    }

    Wq.g += xq.transpose() * dQ;
    Wk.g += xkv.transpose() * dK;
    Wv.g += xkv.transpose() * dV;
    return {dQ * Wq.v.transpose(), dK * Wk.v.transpose() + dV * Wv.v.transpose()};
}

}  // namespace

// Tensor layout: 7 input tensors, 18 per block, 6 tail tensors.
enum BaseTensor {
    kMotionW = 0,
    kMotionB,
    kCondW,
    kCondB,
    kActEmbed,
    kFrameActEmbed,
    kTimeEmbed,
    kBaseCount
};
enum BlockTensor {
    kLn1G = 0,
    kLn1B,
    kSaWq,
    kSaWk,
    kSaWv,
    kSaWo,
    kLn2G,
    kLn2B,
    kCaWq,
    kCaWk,
    kCaWv,
    kCaWo,
    kLn3G,
    kLn3B,
    kFfW1,
    kFfB1,
    kFfW2,
    kFfB2,
    kBlockCount
};
enum TailTensor { kLnfG = 0, kLnfB, kOutW, kOutB, kActW, kActB, kTailCount };

namespace {
int block_base(int block) { return kBaseCount + block * kBlockCount; }
int tail_base(int blocks) { return kBaseCount + blocks * kBlockCount; }
}  // namespace

Denoiser::Denoiser(const DenoiserConfig& cfg)
    : cfg_(cfg), schedule_(NoiseSchedule::linear(cfg.schedule_steps, cfg.beta_start, cfg.beta_end)) {
    if (cfg.latent_dim % cfg.heads != 0)
        throw ConfigError("denoiser: latent_dim must be divisible by heads");
    const int d = cfg.latent_dim;
    const int f = 2 * d;
    params_.emplace_back("motion_in.W", cfg.motion_dim, d);
    params_.emplace_back("motion_in.b", 1, d);
    params_.emplace_back("cond_in.W", cfg.cond_dim, d);
    params_.emplace_back("cond_in.b", 1, d);
    params_.emplace_back("act_embed", cfg.num_acts, d);
    params_.emplace_back("frame_act_embed", cfg.num_acts, d);
    params_.emplace_back("time_embed", cfg.schedule_steps, d);
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        params_.emplace_back(p + "ln1.g", 1, d);
        params_.emplace_back(p + "ln1.b", 1, d);
        params_.emplace_back(p + "self.Wq", d, d);
        params_.emplace_back(p + "self.Wk", d, d);
        params_.emplace_back(p + "self.Wv", d, d);
        params_.emplace_back(p + "self.Wo", d, d);
        params_.emplace_back(p + "ln2.g", 1, d);
        params_.emplace_back(p + "ln2.b", 1, d);
        params_.emplace_back(p + "cross.Wq", d, d);
        params_.emplace_back(p + "cross.Wk", d, d);
        params_.emplace_back(p + "cross.Wv", d, d);
        params_.emplace_back(p + "cross.Wo", d, d);
        params_.emplace_back(p + "ln3.g", 1, d);
        params_.emplace_back(p + "ln3.b", 1, d);
        params_.emplace_back(p + "ffn.W1", d, f);
        params_.emplace_back(p + "ffn.b1", 1, f);
        params_.emplace_back(p + "ffn.W2", f, d);
        params_.emplace_back(p + "ffn.b2", 1, d);
    }
    params_.emplace_back("final_ln.g", 1, d);
    params_.emplace_back("final_ln.b", 1, d);
    params_.emplace_back("out.W", d, cfg.motion_dim);
    params_.emplace_back("out.b", 1, cfg.motion_dim);
    params_.emplace_back("act_head.W", d, cfg.num_acts);
    params_.emplace_back("act_head.b", 1, cfg.num_acts);

    // layer norms start at identity even before init_params
    for (auto& t : params_)
        if (t.name.ends_with("ln.g") || t.name.ends_with("1.g") || t.name.ends_with("2.g") ||
            t.name.ends_with("3.g"))
            t.v.setOnes();
}

void Denoiser::init_params(Rng& rng) {
    for (auto& t : params_) {
        if (t.name.find(".g") != std::string::npos && t.v.rows() == 1 &&
            (t.name.find("ln") != std::string::npos)) {
            t.v.setOnes();
            continue;
        }
        if (t.name.find("ln") != std::string::npos || t.name.ends_with(".b") ||
            t.name.ends_with(".b1") || t.name.ends_with(".b2")) {
            t.v.setZero();
            continue;
        }
        if (t.name.find("embed") != std::string::npos) {
            for (Eigen::Index i = 0; i < t.v.rows(); ++i)
                for (Eigen::Index j = 0; j < t.v.cols(); ++j) t.v(i, j) = 0.02 * rng.gaussian();
            continue;
        }
        const double lim = std::sqrt(6.0 / static_cast<double>(t.v.rows() + t.v.cols()));
        for (Eigen::Index i = 0; i < t.v.rows(); ++i)
            for (Eigen::Index j = 0; j < t.v.cols(); ++j) t.v(i, j) = rng.uniform(-lim, lim);
    }
}

std::vector<Tensor*> Denoiser::parameters() {
    std::vector<Tensor*> out;
    out.reserve(params_.size());
    for (auto& t : params_) out.push_back(&t);
    return out;
}

std::vector<const Tensor*> Denoiser::parameters() const {
    std::vector<const Tensor*> out;
    out.reserve(params_.size());
    for (const auto& t : params_) out.push_back(&t);
    return out;
}

void Denoiser::zero_grad() {
    for (auto& t : params_) t.g.setZero();
}

Eigen::MatrixXd Denoiser::positional_encoding(int T) const {
    const int d = cfg_.latent_dim;
    Eigen::MatrixXd pe(T, d);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
            pe(t, i) = std::sin(t * freq);
            if (i + 1 < d) pe(t, i + 1) = std::cos(t * freq);
        }
    }
    return pe;
}

namespace {

struct BlockCache {
    Eigen::MatrixXd h_in;   // block input
    LnCache ln1, ln2, ln3;
    Eigen::MatrixXd n1, n2, n3;
    AttnCache sa, ca;
    Eigen::MatrixXd h_after_sa, h_after_ca;
    Eigen::MatrixXd z1, a1;  // ffn pre-activation and activation
};

struct ForwardCache {
    Eigen::MatrixXd condl;
    Eigen::MatrixXd h_final;  // pre final-LN
    LnCache lnf;
    Eigen::MatrixXd nf;
    Eigen::RowVectorXd pooled;
    Eigen::VectorXd logits;
    Eigen::MatrixXd eps;
    std::vector<BlockCache> blocks;
};

}  // namespace

struct DenoiserDetail {
    static ForwardCache run_forward(const Denoiser& self, const Eigen::MatrixXd& x_s, int s,
                                    const Eigen::MatrixXd& cond, const Eigen::VectorXd& u,
                                    const Eigen::MatrixXd& u_frames) {
        const auto& cfg = self.cfg_;
        const auto& P = self.params_;
        const auto T = x_s.rows();
        if (x_s.cols() != cfg.motion_dim) throw std::invalid_argument("denoiser: motion dim mismatch");
        if (cond.rows() != T || cond.cols() != cfg.cond_dim)
            throw std::invalid_argument("denoiser: conditioning shape mismatch");
        if (u.size() != cfg.num_acts || u_frames.rows() != T || u_frames.cols() != cfg.num_acts)
            throw std::invalid_argument("denoiser: act encoding shape mismatch");
        if (s < 0 || s >= cfg.schedule_steps) throw std::out_of_range("denoiser: timestep out of range");

        ForwardCache c;
        const Eigen::MatrixXd pe = self.positional_encoding(static_cast<int>(T));

        Eigen::MatrixXd h = x_s * P[kMotionW].v;
        h.rowwise() += P[kMotionB].v.row(0);
        const Eigen::RowVectorXd e_clip = u.transpose() * P[kActEmbed].v;
        h.rowwise() += cfg.lambda_c * e_clip;
        h += cfg.lambda_f * (u_frames * P[kFrameActEmbed].v);
        h.rowwise() += P[kTimeEmbed].v.row(s);
        h += pe;

        c.condl = cond * P[kCondW].v;
        c.condl.rowwise() += P[kCondB].v.row(0);
        c.condl += pe;

        c.blocks.resize(static_cast<std::size_t>(cfg.blocks));
        for (int b = 0; b < cfg.blocks; ++b) {
            auto& bc = c.blocks[static_cast<std::size_t>(b)];
            const int base = block_base(b);
            bc.h_in = h;
            bc.n1 = ln_forward(h, P[base + kLn1G], P[base + kLn1B], bc.ln1);
            h += attn_forward(bc.n1, bc.n1, cfg.heads, cfg.window, P[base + kSaWq], P[base + kSaWk],
                              P[base + kSaWv], P[base + kSaWo], bc.sa);
            bc.h_after_sa = h;
            bc.n2 = ln_forward(h, P[base + kLn2G], P[base + kLn2B], bc.ln2);
            h += attn_forward(bc.n2, c.condl, cfg.heads, cfg.window, P[base + kCaWq], P[base + kCaWk],
                              P[base + kCaWv], P[base + kCaWo], bc.ca);
            bc.h_after_ca = h;
            bc.n3 = ln_forward(h, P[base + kLn3G], P[base + kLn3B], bc.ln3);
            bc.z1 = bc.n3 * P[base + kFfW1].v;
            bc.z1.rowwise() += P[base + kFfB1].v.row(0);
            bc.a1 = bc.z1.unaryExpr([](double x) { return gelu(x); });
            Eigen::MatrixXd ff = bc.a1 * P[base + kFfW2].v;
            ff.rowwise() += P[base + kFfB2].v.row(0);
            h += ff;
        }

        const int tb = tail_base(cfg.blocks);
        c.h_final = h;
        c.nf = ln_forward(h, P[tb + kLnfG], P[tb + kLnfB], c.lnf);
        c.eps = c.nf * P[tb + kOutW].v;
        c.eps.rowwise() += P[tb + kOutB].v.row(0);
        c.pooled = c.nf.colwise().mean();
        c.logits = (c.pooled * P[tb + kActW].v + P[tb + kActB].v.row(0)).transpose();
        return c;
    }

    static void run_backward(Denoiser& self, const ForwardCache& c, const Eigen::MatrixXd& x_s, int s,
                             const Eigen::MatrixXd& cond, const Eigen::VectorXd& u,
                             const Eigen::MatrixXd& u_frames, const Eigen::MatrixXd& d_eps,
                             const Eigen::VectorXd& d_logits) {
        const auto& cfg = self.cfg_;
        auto& P = self.params_;
        const auto T = x_s.rows();
        const int tb = tail_base(cfg.blocks);

        // output heads
        P[tb + kOutW].g += c.nf.transpose() * d_eps;
        P[tb + kOutB].g.row(0) += d_eps.colwise().sum();
        Eigen::MatrixXd d_nf = d_eps * P[tb + kOutW].v.transpose();

        P[tb + kActW].g += c.pooled.transpose() * d_logits.transpose();
        P[tb + kActB].g.row(0) += d_logits.transpose();
        const Eigen::RowVectorXd d_pooled = (P[tb + kActW].v * d_logits).transpose();
        d_nf.rowwise() += d_pooled / static_cast<double>(T);

        Eigen::MatrixXd d_h = ln_backward(d_nf, c.lnf, P[tb + kLnfG], P[tb + kLnfB]);
        Eigen::MatrixXd d_condl = Eigen::MatrixXd::Zero(T, cfg.latent_dim);

        for (int b = cfg.blocks - 1; b >= 0; --b) {
            const auto& bc = c.blocks[static_cast<std::size_t>(b)];
            const int base = block_base(b);

            // ffn branch
            {
                const Eigen::MatrixXd& d_ff = d_h;
                P[base + kFfW2].g += bc.a1.transpose() * d_ff;
                P[base + kFfB2].g.row(0) += d_ff.colwise().sum();
                Eigen::MatrixXd d_a1 = d_ff * P[base + kFfW2].v.transpose();
                Eigen::MatrixXd d_z1 =
                    d_a1.cwiseProduct(bc.z1.unaryExpr([](double x) { return gelu_grad(x); }));
                P[base + kFfW1].g += bc.n3.transpose() * d_z1;
                P[base + kFfB1].g.row(0) += d_z1.colwise().sum();
                const Eigen::MatrixXd d_n3 = d_z1 * P[base + kFfW1].v.transpose();
                d_h += ln_backward(d_n3, bc.ln3, P[base + kLn3G], P[base + kLn3B]);
            }
            // cross-attention branch
            {
                auto [d_n2, d_kv] = attn_backward(bc.n2, c.condl, d_h, cfg.heads, cfg.window,
                                                  P[base + kCaWq], P[base + kCaWk], P[base + kCaWv],
                                                  P[base + kCaWo], bc.ca);
                d_condl += d_kv;
                d_h += ln_backward(d_n2, bc.ln2, P[base + kLn2G], P[base + kLn2B]);
            }
            // self-attention branch
            {
                auto [d_q, d_kv] = attn_backward(bc.n1, bc.n1, d_h, cfg.heads, cfg.window,
                                                 P[base + kSaWq], P[base + kSaWk], P[base + kSaWv],
                                                 P[base + kSaWo], bc.sa);
                const Eigen::MatrixXd d_n1 = d_q + d_kv;
                d_h += ln_backward(d_n1, bc.ln1, P[base + kLn1G], P[base + kLn1B]);
            }
        }

        // input projections and embeddings
        P[kMotionW].g += x_s.transpose() * d_h;
        P[kMotionB].g.row(0) += d_h.colwise().sum();
        const Eigen::RowVectorXd col_sum = d_h.colwise().sum();
        P[kActEmbed].g += cfg.lambda_c * (u * col_sum);
        P[kFrameActEmbed].g += cfg.lambda_f * (u_frames.transpose() * d_h);
        P[kTimeEmbed].g.row(s) += col_sum;

        P[kCondW].g += cond.transpose() * d_condl;
        P[kCondB].g.row(0) += d_condl.colwise().sum();
    }
};

DenoiserOutput Denoiser::forward(const Eigen::MatrixXd& x_s, int s, const Eigen::MatrixXd& cond,
                                 const Eigen::VectorXd& u, const Eigen::MatrixXd& u_frames) const {
    ForwardCache c = DenoiserDetail::run_forward(*this, x_s, s, cond, u, u_frames);
    return {std::move(c.eps), std::move(c.logits)};
}

LossValue Denoiser::loss_and_grad(const LossInput& in, bool accumulate_grads) {
    const auto T = in.x_s.rows();
    const int Dm = cfg_.motion_dim;
    if (in.frame_weights.size() != T) throw std::invalid_argument("loss: frame_weights length mismatch");
    if (in.act_index < 0 || in.act_index >= cfg_.num_acts)
        throw std::invalid_argument("loss: act index out of range");

    ForwardCache c = DenoiserDetail::run_forward(*this, in.x_s, in.s, in.cond, in.u, in.u_frames);

    LossValue lv;
    const double wsum = in.frame_weights.sum();
    const double denom = wsum * Dm;
    Eigen::MatrixXd d_eps(T, Dm);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::RowVectorXd r = c.eps.row(t) - in.eps_target.row(t);
        lv.diff += in.frame_weights(t) * r.squaredNorm();
        d_eps.row(t) = (2.0 * in.frame_weights(t) / denom) * r;
    }
    lv.diff /= denom;

    // act cross-entropy (softmax with max subtraction)
    Eigen::VectorXd p = c.logits;
    const double mx = p.maxCoeff();
    p = (p.array() - mx).exp();
    p /= p.sum();
    lv.act = -std::log(std::max(p(in.act_index), 1e-300));
    lv.total = lv.diff + cfg_.lambda_act * lv.act;

    if (accumulate_grads) {
        Eigen::VectorXd d_logits = cfg_.lambda_act * p;
        d_logits(in.act_index) -= cfg_.lambda_act;
        DenoiserDetail::run_backward(*this, c, in.x_s, in.s, in.cond, in.u, in.u_frames, d_eps, d_logits);
    }
    return lv;
}

void Denoiser::save(const std::string& path) const {
    nlohmann::json header = {{"format", "denoiser_checkpoint"}, {"version", 1}, {"config", cfg_.to_json()}};
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& t : params_)
        shapes.push_back({{"name", t.name}, {"rows", t.v.rows()}, {"cols", t.v.cols()}});
    header["tensors"] = std::move(shapes);
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    const char magic[4] = {'T', 'M', 'C', 'K'};
    f.write(magic, 4);
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& t : params_)
        f.write(reinterpret_cast<const char*>(t.v.data()),
                static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.v.size())));
}

Denoiser Denoiser::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, "TMCK", 4) != 0) throw DataError("not a denoiser checkpoint: " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    const nlohmann::json header = nlohmann::json::parse(hs);
    if (header.value("format", "") != "denoiser_checkpoint" || header.value("version", 0) != 1)
        throw DataError("unrecognized checkpoint envelope");
    Denoiser den(DenoiserConfig::from_json(header.at("config")));
    const auto& shapes = header.at("tensors");
    if (shapes.size() != den.params_.size()) throw DataError("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < den.params_.size(); ++i) {
        auto& t = den.params_[i];
        if (shapes[i].at("name").get<std::string>() != t.name ||
            shapes[i].at("rows").get<Eigen::Index>() != t.v.rows() ||
            shapes[i].at("cols").get<Eigen::Index>() != t.v.cols())
            throw DataError("checkpoint tensor mismatch at " + t.name);
        f.read(reinterpret_cast<char*>(t.v.data()),
               static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.v.size())));
    }
    if (!f) throw DataError("checkpoint truncated: " + path);
    return den;
}

}  // namespace tutor::diffusion
