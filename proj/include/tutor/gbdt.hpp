#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tutor/common.hpp"

#include <json.hpp>

namespace tutor::gbdt {

enum class Modality { text = 0, visual = 1, acoustic = 2 };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// Pseudo-Huber loss delta^2 (sqrt(1 + (r/delta)^2) - 1): quadratic near zero,
// linear in the tails, gradient magnitude bounded by delta.
double pseudo_huber_loss(double residual, double delta);
double pseudo_huber_grad(double residual, double delta);
double pseudo_huber_hess(double residual, double delta);

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0; // go left if x[feature] < threshold
    int left = -1;
    int right = -1;
    double value = 0.0;     // leaf weight (pre learning-rate)
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
};

struct BoostingConfig {
    int max_depth = 6;
    double learning_rate = 0.05;
    int rounds = 500;
    int patience = 30;
    double row_subsample = 0.8;
    double feature_subsample = 0.8;
    double delta = 1.0;       // pseudo-Huber scale
    double reg_lambda = 1.0;  // L2 on leaf weights
    double min_gain = 1e-12;
    int min_leaf = 1;
    std::uint64_t seed = 0;
};

struct BoostedModel {
    std::vector<RegressionTree> trees;
    double base_score = 0.0;
    double learning_rate = 0.0;
    double delta = 1.0;
    int best_round = 0;  // number of trees used at prediction time
    int feature_dim = 0;
    std::uint64_t seed = 0;

    double predict(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static BoostedModel from_json(const nlohmann::json& j);
};

struct FitResult {
    BoostedModel model;
    std::vector<double> train_loss;  // per round, on the training set
    std::vector<double> val_loss;    // per round, on the validation set
};

using Matrix = std::vector<std::vector<double>>;

// Gradient boosting with the pseudo-Huber objective: each round fits a
// depth-limited tree to the gradient/Hessian statistics (Newton-style leaf
// weights), with row/feature subsampling and validation early stopping.
FitResult fit_expert(const Matrix& X, const std::vector<double>& y,
                     const Matrix& X_val, const std::vector<double>& y_val,
                     const BoostingConfig& config);

double predict_expert(const BoostedModel& model, std::span<const double> x);

}  // namespace tutor::gbdt
