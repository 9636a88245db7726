#include "tutor/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tutor::gbdt {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::text: return "text";
        case Modality::visual: return "visual";
        case Modality::acoustic: return "acoustic";
    }
    return "?";
}

Modality modality_from_name(const std::string& name) {
    if (name == "text") return Modality::text;
    if (name == "visual") return Modality::visual;
    if (name == "acoustic") return Modality::acoustic;
    throw std::invalid_argument("unknown modality: " + name);
}

static void check_delta(double delta) {
    if (!std::isfinite(delta) || delta <= 0.0) throw std::domain_error("pseudo-Huber delta must be positive");
}

double pseudo_huber_loss(double r, double delta) {
    check_delta(delta);
    require_finite(r, "residual");
    const double q = r / delta;
    // delta^2 (sqrt(1+q^2) - 1), written via q^2/(sqrt(1+q^2)+1) to avoid
    // cancellation for small r
    const double s = std::sqrt(1.0 + q * q);
    return delta * delta * (q * q) / (s + 1.0);
}

double pseudo_huber_grad(double r, double delta) {
    check_delta(delta);
    require_finite(r, "residual");
    const double q = r / delta;
    return r / std::sqrt(1.0 + q * q);
}

double pseudo_huber_hess(double r, double delta) {
    check_delta(delta);
    require_finite(r, "residual");
    const double q = r / delta;
    const double s = 1.0 + q * q;
    return 1.0 / (s * std::sqrt(s));
}

double RegressionTree::predict(std::span<const double> x) const {
    if (nodes.empty()) return 0.0;
    int i = 0;
    while (nodes[i].feature >= 0) {
        i = x[static_cast<std::size_t>(nodes[i].feature)] < nodes[i].threshold ? nodes[i].left
                                                                              : nodes[i].right;
    }
    return nodes[i].value;
}

double BoostedModel::predict(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != feature_dim)
        throw std::invalid_argument("feature dim mismatch: expected " + std::to_string(feature_dim) +
                                    ", got " + std::to_string(x.size()));
    double acc = base_score;
    for (int t = 0; t < best_round; ++t) acc += learning_rate * trees[static_cast<std::size_t>(t)].predict(x);
    return acc;
}

double predict_expert(const BoostedModel& model, std::span<const double> x) { return model.predict(x); }

nlohmann::json BoostedModel::to_json() const {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& tree : trees) {
        nlohmann::json jn = nlohmann::json::array();
        for (const auto& n : tree.nodes)
            jn.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"v", n.value}});
        jt.push_back(std::move(jn));
    }
    return {{"format", "boosted_model"},
            {"version", 1},
            {"trees", std::move(jt)},
            {"base_score", base_score},
            {"learning_rate", learning_rate},
            {"delta", delta},
            {"best_round", best_round},
            {"feature_dim", feature_dim},
            {"seed", seed}};
}

BoostedModel BoostedModel::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "boosted_model" || j.value("version", 0) != 1)
        throw DataError("unrecognized boosted model envelope");
    BoostedModel m;
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.delta = j.at("delta").get<double>();
    m.best_round = j.at("best_round").get<int>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jn : j.at("trees")) {
        RegressionTree tree;
        for (const auto& n : jn) {
            TreeNode node;
            node.feature = n.at("f").get<int>();
            node.threshold = n.at("t").get<double>();
            node.left = n.at("l").get<int>();
            node.right = n.at("r").get<int>();
            node.value = n.at("v").get<double>();
            tree.nodes.push_back(node);
        }
        m.trees.push_back(std::move(tree));
    }
    return m;
}

namespace {

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

double leaf_weight(double g, double h, double lam) { return -g / (h + lam); }

double score(double g, double h, double lam) { return g * g / (h + lam); }

// Exact greedy split over (feature, threshold); thresholds are midpoints
// between consecutive distinct values. Ties resolve to the lowest feature
// index, then the lowest threshold.
SplitChoice best_split(const Matrix& X, const std::vector<double>& grad, const std::vector<double>& hess,
                       const std::vector<int>& rows, const std::vector<int>& features, double lam,
                       int min_leaf) {
    double g_tot = 0.0, h_tot = 0.0;
    for (int r : rows) {
        g_tot += grad[static_cast<std::size_t>(r)];
        h_tot += hess[static_cast<std::size_t>(r)];
    }
    const double parent = score(g_tot, h_tot, lam);

    SplitChoice best;
    std::vector<int> order;
    for (int f : features) {
        order = rows;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double va = X[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)];
            const double vb = X[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)];
            if (va != vb) return va < vb;
            return a < b;
        });
        double gl = 0.0, hl = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const int r = order[i];
            gl += grad[static_cast<std::size_t>(r)];
            hl += hess[static_cast<std::size_t>(r)];
            const double v = X[static_cast<std::size_t>(r)][static_cast<std::size_t>(f)];
            const double vn = X[static_cast<std::size_t>(order[i + 1])][static_cast<std::size_t>(f)];
            if (v == vn) continue;
            if (static_cast<int>(i) + 1 < min_leaf || static_cast<int>(order.size() - i) - 1 < min_leaf)
                continue;
            const double gain =
                0.5 * (score(gl, hl, lam) + score(g_tot - gl, h_tot - hl, lam) - parent);
            const double thr = v + 0.5 * (vn - v);
            if (gain > best.gain ||
                (gain == best.gain && best.feature >= 0 &&
                 (f < best.feature || (f == best.feature && thr < best.threshold)))) {
                best.gain = gain;
                best.feature = f;
                best.threshold = thr;
            }
        }
    }
    return best;
}

RegressionTree build_tree(const Matrix& X, const std::vector<double>& grad, const std::vector<double>& hess,
                          const std::vector<int>& rows, const std::vector<int>& features,
                          const BoostingConfig& cfg) {
    RegressionTree tree;
    struct Pending {
        int node;
        std::vector<int> rows;
        int depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, rows, 0});
    while (!stack.empty()) {
        Pending p = std::move(stack.back());
        stack.pop_back();
        double g = 0.0, h = 0.0;
        for (int r : p.rows) {
            g += grad[static_cast<std::size_t>(r)];
            h += hess[static_cast<std::size_t>(r)];
        }
        TreeNode& node = tree.nodes[static_cast<std::size_t>(p.node)];
        node.value = leaf_weight(g, h, cfg.reg_lambda);
        if (p.depth >= cfg.max_depth || static_cast<int>(p.rows.size()) < 2 * cfg.min_leaf) continue;
        const SplitChoice split = best_split(X, grad, hess, p.rows, features, cfg.reg_lambda, cfg.min_leaf);
        if (split.feature < 0 || split.gain <= cfg.min_gain) continue;

        std::vector<int> left, right;
        for (int r : p.rows) {
            if (X[static_cast<std::size_t>(r)][static_cast<std::size_t>(split.feature)] < split.threshold)
                left.push_back(r);
            else
                right.push_back(r);
        }
        const int li = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const int ri = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        TreeNode& nd = tree.nodes[static_cast<std::size_t>(p.node)];
        nd.feature = split.feature;
        nd.threshold = split.threshold;
        nd.left = li;
        nd.right = ri;
        stack.push_back({ri, std::move(right), p.depth + 1});
        stack.push_back({li, std::move(left), p.depth + 1});
    }
    return tree;
}

// Recomputes leaf values from full-sample statistics. The tree structure may
// come from a row subsample; refreshed leaves keep the boosting step a descent
// direction on the whole training set.
void refresh_leaves(RegressionTree& tree, const Matrix& X, const std::vector<double>& grad,
                    const std::vector<double>& hess, double lam) {
    std::vector<double> g(tree.nodes.size(), 0.0), h(tree.nodes.size(), 0.0);
    for (std::size_t r = 0; r < X.size(); ++r) {
        int i = 0;
        while (tree.nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& n = tree.nodes[static_cast<std::size_t>(i)];
            i = X[r][static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        g[static_cast<std::size_t>(i)] += grad[r];
        h[static_cast<std::size_t>(i)] += hess[r];
    }
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        if (tree.nodes[i].feature < 0) tree.nodes[i].value = leaf_weight(g[i], h[i], lam);
}

double mean_ph_loss(const std::vector<double>& pred, const std::vector<double>& y, double delta) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += pseudo_huber_loss(pred[i] - y[i], delta);
    return acc / static_cast<double>(y.size());
}

}  // namespace

FitResult fit_expert(const Matrix& X, const std::vector<double>& y, const Matrix& X_val,
                     const std::vector<double>& y_val, const BoostingConfig& cfg) {
    if (X.empty() || X.size() != y.size()) throw std::invalid_argument("fit_expert: empty or mismatched data");
    if (X.size() < 2) throw std::invalid_argument("fit_expert: need at least 2 samples");
    if (X_val.empty() || X_val.size() != y_val.size())
        throw std::invalid_argument("fit_expert: validation split must be non-empty");
    const std::size_t dim = X[0].size();
    for (const auto& row : X) {
        if (row.size() != dim) throw std::invalid_argument("fit_expert: ragged feature matrix");
        for (double v : row) require_finite(v, "feature");
    }
    for (double v : y) require_finite(v, "target");

    // Canonical row order (lexicographic over features, then target) so the
    // fitted model does not depend on how the caller ordered the samples.
    std::vector<int> perm(X.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) {
        const auto& ra = X[static_cast<std::size_t>(a)];
        const auto& rb = X[static_cast<std::size_t>(b)];
        if (ra != rb) return ra < rb;
        return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)];
    });
    Matrix Xc(X.size());
    std::vector<double> yc(y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        Xc[i] = X[static_cast<std::size_t>(perm[i])];
        yc[i] = y[static_cast<std::size_t>(perm[i])];
    }

    const int n = static_cast<int>(Xc.size());
    const int n_features = static_cast<int>(dim);

    FitResult out;
    BoostedModel& model = out.model;
    model.learning_rate = cfg.learning_rate;
    model.delta = cfg.delta;
    model.feature_dim = n_features;
    model.seed = cfg.seed;
    model.base_score = std::accumulate(yc.begin(), yc.end(), 0.0) / n;

    std::vector<double> pred(static_cast<std::size_t>(n), model.base_score);
    std::vector<double> pred_val(y_val.size(), model.base_score);
    std::vector<double> grad(static_cast<std::size_t>(n)), hess(static_cast<std::size_t>(n));

    Rng rng(derive_seed(cfg.seed, "gbdt"));
    double best_val = std::numeric_limits<double>::infinity();
    int best_round = 0;
    int since_best = 0;

    const int n_rows_sub = std::max(1, static_cast<int>(std::floor(cfg.row_subsample * n)));
    const int n_feat_sub = std::max(1, static_cast<int>(std::floor(cfg.feature_subsample * n_features)));

    for (int round = 0; round < cfg.rounds; ++round) {
        for (int i = 0; i < n; ++i) {
            const double r = pred[static_cast<std::size_t>(i)] - yc[static_cast<std::size_t>(i)];
            grad[static_cast<std::size_t>(i)] = pseudo_huber_grad(r, cfg.delta);
            hess[static_cast<std::size_t>(i)] = pseudo_huber_hess(r, cfg.delta);
        }

        std::vector<int> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), 0);
        if (n_rows_sub < n) {
            // partial Fisher-Yates; keep the selected prefix sorted
            for (int i = 0; i < n_rows_sub; ++i) {
                const int j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
                std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
            }
            rows.resize(static_cast<std::size_t>(n_rows_sub));
            std::sort(rows.begin(), rows.end());
        }
        std::vector<int> features(static_cast<std::size_t>(n_features));
        std::iota(features.begin(), features.end(), 0);
        if (n_feat_sub < n_features) {
            for (int i = 0; i < n_feat_sub; ++i) {
                const int j =
                    i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_features - i)));
                std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]);
            }
            features.resize(static_cast<std::size_t>(n_feat_sub));
            std::sort(features.begin(), features.end());
        }

        RegressionTree tree = build_tree(Xc, grad, hess, rows, features, cfg);
        if (n_rows_sub < n) refresh_leaves(tree, Xc, grad, hess, cfg.reg_lambda);
        for (int i = 0; i < n; ++i)
            pred[static_cast<std::size_t>(i)] += cfg.learning_rate * tree.predict(Xc[static_cast<std::size_t>(i)]);
        for (std::size_t i = 0; i < y_val.size(); ++i)
            pred_val[i] += cfg.learning_rate * tree.predict(X_val[i]);
        model.trees.push_back(std::move(tree));

        out.train_loss.push_back(mean_ph_loss(pred, yc, cfg.delta));
        const double vl = mean_ph_loss(pred_val, y_val, cfg.delta);
        out.val_loss.push_back(vl);

        if (vl < best_val) {
            best_val = vl;
            best_round = round + 1;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model.best_round = best_round == 0 ? static_cast<int>(model.trees.size()) : best_round;
    return out;
}

}  // namespace tutor::gbdt
