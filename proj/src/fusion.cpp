#include "tutor/fusion.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace tutor::fusion {

nlohmann::json GateParams::to_json() const {
    std::vector<std::vector<double>> w(3, std::vector<double>(3));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = W(i, j);
    return {{"format", "gate_params"},
            {"version", 1},
            {"W", w},
            {"b", std::vector<double>{b(0), b(1), b(2)}}};
}

GateParams GateParams::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gate_params" || j.value("version", 0) != 1)
        throw DataError("unrecognized gate params envelope");
    GateParams p;
    const auto& w = j.at("W");
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            p.W(i, k) = w.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
    const auto& b = j.at("b");
    for (int i = 0; i < 3; ++i) p.b(i) = b.at(static_cast<std::size_t>(i)).get<double>();
    return p;
}

Eigen::Vector3d gate_forward(const Eigen::Vector3d& reliability, const GateParams& params) {
    if (!reliability.allFinite() || !params.W.allFinite() || !params.b.allFinite())
        throw std::domain_error("gate_forward: non-finite input");
    Eigen::Vector3d z = params.W * reliability + params.b;
    const double m = z.maxCoeff();
    Eigen::Vector3d e = (z.array() - m).exp();
    return e / e.sum();
}

double gate_entropy(const Eigen::Vector3d& w) {
    double h = 0.0;
    for (int i = 0; i < 3; ++i)
        if (w(i) > 0.0) h -= w(i) * std::log(w(i));
    return h;
}

double gate_confidence(const Eigen::Vector3d& w) { return 1.0 - gate_entropy(w) / std::log(3.0); }

VAEstimate fuse(const std::array<ExpertPrediction, 3>& experts, const Eigen::Vector3d& w) {
    if (!w.allFinite() || w.minCoeff() < 0.0 || std::abs(w.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("fuse: weights must lie on the simplex");
    VAEstimate est;
    est.per_modality = experts;
    est.weights = w;
    for (int m = 0; m < 3; ++m) {
        est.valence += w(m) * experts[static_cast<std::size_t>(m)].valence;
        est.arousal += w(m) * experts[static_cast<std::size_t>(m)].arousal;
    }
    return est;
}

double gate_loss(const std::vector<GateSample>& data, const GateParams& params, double lambda_entropy) {
    double acc = 0.0;
    for (const auto& s : data) {
        const Eigen::Vector3d w = gate_forward(s.reliability, params);
        const VAEstimate est = fuse(s.experts, w);
        const double ev = est.valence - s.valence_target;
        const double ea = est.arousal - s.arousal_target;
        acc += ev * ev + ea * ea - lambda_entropy * gate_entropy(w);
    }
    return acc / static_cast<double>(data.size());
}

void gate_loss_grad(const std::vector<GateSample>& data, const GateParams& params, double lambda_entropy,
                    Eigen::Matrix3d& dW, Eigen::Vector3d& db) {
    dW.setZero();
    db.setZero();
    const double n = static_cast<double>(data.size());
    for (const auto& s : data) {
        const Eigen::Vector3d w = gate_forward(s.reliability, params);
        const VAEstimate est = fuse(s.experts, w);
        const double ev = est.valence - s.valence_target;
        const double ea = est.arousal - s.arousal_target;

        Eigen::Vector3d dLdw;
        for (int m = 0; m < 3; ++m) {
            dLdw(m) = 2.0 * ev * s.experts[static_cast<std::size_t>(m)].valence +
                      2.0 * ea * s.experts[static_cast<std::size_t>(m)].arousal;
            // d(-lambda H)/dw_m = lambda (log w_m + 1)
            dLdw(m) += lambda_entropy * (std::log(std::max(w(m), 1e-300)) + 1.0);
        }
        // softmax Jacobian: dw_m/dz_k = w_m (delta_mk - w_k)
        const Eigen::Vector3d dLdz = w.cwiseProduct(dLdw) - w * w.dot(dLdw);
        dW += dLdz * s.reliability.transpose();
        db += dLdz;
    }
    dW /= n;
    db /= n;
}

GateParams train_gate(const std::vector<GateSample>& train, const std::vector<GateSample>& val,
                      const GateParams& init, const GateTrainConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_gate: empty dataset");
    const std::vector<GateSample>& dev = val.empty() ? train : val;

    GateParams p = init;
    GateParams best = p;
    double best_loss = gate_loss(dev, p, 0.0);
    Eigen::Matrix3d vW = Eigen::Matrix3d::Zero();
    Eigen::Vector3d vb = Eigen::Vector3d::Zero();
    Eigen::Matrix3d dW;
    Eigen::Vector3d db;

    for (int step = 0; step < cfg.steps; ++step) {
        gate_loss_grad(train, p, cfg.lambda_entropy, dW, db);
        vW = cfg.momentum * vW - cfg.lr * dW;
        vb = cfg.momentum * vb - cfg.lr * db;
        p.W += vW;
        p.b += vb;

        const double train_l = gate_loss(train, p, cfg.lambda_entropy);
        if (!std::isfinite(train_l)) {
            std::ostringstream msg;
            msg << "train_gate diverged at step " << step << " (loss=" << train_l << ", lr=" << cfg.lr
                << ")";
            throw TrainingError(msg.str());
        }
        const double dev_l = gate_loss(dev, p, 0.0);
        if (dev_l < best_loss) {
            best_loss = dev_l;
            best = p;
        }
    }
    return best;
}

double Calibration::apply(double x) const {
    const double y = scale * x + offset;
    return std::min(hi, std::max(lo, y));
}

nlohmann::json Calibration::to_json() const {
    return {{"format", "calibration"}, {"version", 1},       {"scale", scale},
            {"offset", offset},        {"lo", lo},           {"hi", hi},
            {"degenerate", degenerate}};
}

Calibration Calibration::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "calibration" || j.value("version", 0) != 1)
        throw DataError("unrecognized calibration envelope");
    Calibration c;
    c.scale = j.at("scale").get<double>();
    c.offset = j.at("offset").get<double>();
    c.lo = j.at("lo").get<double>();
    c.hi = j.at("hi").get<double>();
    c.degenerate = j.at("degenerate").get<bool>();
    return c;
}

Calibration calibrate(const std::vector<double>& predictions, const std::vector<double>& targets,
                      double lo, double hi) {
    if (predictions.size() != targets.size() || predictions.size() < 10)
        throw std::invalid_argument("calibrate: need >= 10 paired development samples");
    const double n = static_cast<double>(predictions.size());
    double mx = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        mx += predictions[i];
        mt += targets[i];
    }
    mx /= n;
    mt /= n;
    double sxx = 0.0, sxt = 0.0, stt = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double dx = predictions[i] - mx;
        const double dt = targets[i] - mt;
        sxx += dx * dx;
        sxt += dx * dt;
        stt += dt * dt;
    }

    Calibration c;
    c.lo = lo;
    c.hi = hi;
    // tolerance absorbs rounding noise from the mean subtraction on
    // constant inputs (sxx is then ~n * (eps * |mx|)^2, far below this)
    const double sxx_floor = n * 1e-24 * std::max(1.0, mx * mx);
    if (sxx <= sxx_floor) {
        c.degenerate = true;  // constant predictions: identity map, caller warned via flag
        return c;
    }
    // Affine least squares (matches the target mean), then rescale about that
    // mean so the calibrated std equals the target std.
    const double a = sxt / sxx;
    const double sigma_affine = std::abs(a) * std::sqrt(sxx / n);
    const double sigma_target = std::sqrt(stt / n);
    const double s = (sigma_affine > 0.0 && sigma_target > 0.0) ? sigma_target / sigma_affine : 1.0;
    c.scale = s * a;
    c.offset = mt - s * a * mx;
    return c;
}

ModalityFeatures degrade_modality(const ModalityFeatures& features, DegradeMode mode) {
    ModalityFeatures out = features;
    switch (mode) {
        case DegradeMode::none:
            break;
        case DegradeMode::mask_visual:
            std::fill(out.visual.begin(), out.visual.end(), 0.0);
            out.reliability(kVisual) = 0.0;
            break;
        case DegradeMode::mask_acoustic:
            std::fill(out.acoustic.begin(), out.acoustic.end(), 0.0);
            out.reliability(kAcoustic) = 0.0;
            break;
        case DegradeMode::mask_text:
            std::fill(out.text.begin(), out.text.end(), 0.0);
            out.reliability(kTextual) = 0.0;
            break;
    }
    return out;
}

}  // namespace tutor::fusion
