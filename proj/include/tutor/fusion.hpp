#pragma once

#include <array>
#include <vector>

#include "tutor/common.hpp"
#include "tutor/gbdt.hpp"

#include <Eigen/Dense>
#include <json.hpp>

namespace tutor::fusion {

// Gate channel order is (visual, acoustic, textual) throughout this module,
// for both reliability inputs and gate weights.
enum Channel { kVisual = 0, kAcoustic = 1, kTextual = 2 };

struct ExpertPrediction {
    double valence = 0.0;  // unclipped
    double arousal = 0.0;  // unclipped
};

struct GateParams {
    Eigen::Matrix3d W = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();

    nlohmann::json to_json() const;
    static GateParams from_json(const nlohmann::json& j);
};

struct VAEstimate {
    double valence = 0.0;
    double arousal = 0.0;
    std::array<ExpertPrediction, 3> per_modality{};  // (vis, aud, txt)
    Eigen::Vector3d weights = Eigen::Vector3d::Zero();
    bool calibrated = false;
};

// w = softmax(W g + b), numerically stable via max subtraction.
Eigen::Vector3d gate_forward(const Eigen::Vector3d& reliability, const GateParams& params);

double gate_entropy(const Eigen::Vector3d& w);

// Maps gate entropy to a confidence in [0, 1]: 1 at a one-hot gate, 0 at uniform.
double gate_confidence(const Eigen::Vector3d& w);

VAEstimate fuse(const std::array<ExpertPrediction, 3>& experts, const Eigen::Vector3d& w);

struct GateSample {
    std::array<ExpertPrediction, 3> experts{};  // (vis, aud, txt)
    Eigen::Vector3d reliability = Eigen::Vector3d::Zero();
    double valence_target = 0.0;
    double arousal_target = 0.0;
};

struct GateTrainConfig {
    double lambda_entropy = 0.01;  // entropy bonus weight
    double lr = 0.05;
    double momentum = 0.9;
    int steps = 2000;
};

// Objective on frozen expert outputs:
//   mean[(v_hat - v)^2 + (a_hat - a)^2] - lambda_entropy * mean H(w)
double gate_loss(const std::vector<GateSample>& data, const GateParams& params, double lambda_entropy);

// Analytic gradient of gate_loss with respect to (W, b).
void gate_loss_grad(const std::vector<GateSample>& data, const GateParams& params, double lambda_entropy,
                    Eigen::Matrix3d& dW, Eigen::Vector3d& db);

// Momentum gradient descent; returns the parameters at the best validation
// loss. Throws TrainingError if the loss becomes non-finite.
GateParams train_gate(const std::vector<GateSample>& train, const std::vector<GateSample>& val,
                      const GateParams& init, const GateTrainConfig& cfg);

struct Calibration {
    double scale = 1.0;   // combined affine + variance-matching map
    double offset = 0.0;
    double lo = -1.0;     // clamp range applied after the affine map
    double hi = 1.0;
    bool degenerate = false;  // zero prediction variance; identity returned

    double apply(double x) const;

    nlohmann::json to_json() const;
    static Calibration from_json(const nlohmann::json& j);
};

// Least-squares affine fit followed by variance matching; the returned params
// are the composed map. Requires >= 10 development samples.
Calibration calibrate(const std::vector<double>& predictions, const std::vector<double>& targets,
                      double lo, double hi);

struct ModalityFeatures {
    std::vector<double> text;
    std::vector<double> visual;
    std::vector<double> acoustic;
    Eigen::Vector3d reliability = Eigen::Vector3d::Ones();  // (vis, aud, txt)
};

enum class DegradeMode { none, mask_visual, mask_acoustic, mask_text };

// Zeroes the masked modality's features and its reliability component.
ModalityFeatures degrade_modality(const ModalityFeatures& features, DegradeMode mode);

}  // namespace tutor::fusion
