#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridcf/errors.hpp"
#include "gridcf/learn.hpp"

namespace gridcf {

namespace {

double gini(double w_feasible, double w_infeasible) {
    const double total = w_feasible + w_infeasible;
    if (total <= 0.0) return 0.0;
    const double p = w_feasible / total;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

class CartBuilder {
public:
    CartBuilder(const Dataset& data, const TreeConfig& config) : data_(data), config_(config) {}

    void build(TreeModel& model) {
        std::vector<std::size_t> idx(data_.size());
        std::iota(idx.begin(), idx.end(), 0);
        nodes_ = &model.nodes;
        grow(idx, 0);
    }

private:
    int grow(const std::vector<std::size_t>& idx, int depth) {
        TreeNode node;
        node.depth = depth;
        double wf = 0.0, wi = 0.0;
        for (std::size_t i : idx) {
            if (data_.samples[i].label == FeasibilityLabel::Feasible) {
                ++node.count_feasible;
                wf += config_.class_weights.feasible;
            } else {
                ++node.count_infeasible;
                wi += config_.class_weights.infeasible;
            }
        }
        node.proba = wf + wi > 0.0 ? wf / (wf + wi) : 0.5;
        const int id = static_cast<int>(nodes_->size());
        nodes_->push_back(node);

        const double parent = gini(wf, wi);
        if (depth >= config_.max_depth || idx.size() < config_.min_samples_split || parent == 0.0) {
            return id;
        }

        const std::size_t d = data_.features();
        double best_score = parent - 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> sorted = idx;
        for (std::size_t f = 0; f < d; ++f) {
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                const double va = data_.samples[a].profile[f], vb = data_.samples[b].profile[f];
                return va < vb || (va == vb && a < b);
            });
            double lf = 0.0, li = 0.0;
            const double total = wf + wi;
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                const auto& s = data_.samples[sorted[k]];
                if (s.label == FeasibilityLabel::Feasible) lf += config_.class_weights.feasible;
                else li += config_.class_weights.infeasible;
                const double v = s.profile[f];
                const double next = data_.samples[sorted[k + 1]].profile[f];
                if (next <= v) continue;
                const double lw = lf + li;
                const double rw = total - lw;
                const double score = (lw * gini(lf, li) + rw * gini(wf - lf, wi - li)) / total;
                if (score < best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (v + next);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            (data_.samples[i].profile[static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right)
                .push_back(i);
        }
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        TreeNode& self = (*nodes_)[static_cast<std::size_t>(id)];
        self.feature = best_feature;
        self.threshold = best_threshold;
        self.left = l;
        self.right = r;
        return id;
    }

    const Dataset& data_;
    const TreeConfig& config_;
    std::vector<TreeNode>* nodes_ = nullptr;
};

}  // namespace

int TreeModel::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

const TreeNode& TreeModel::leaf_for(std::span<const double> raw) const {
    if (raw.size() != scaler.dim()) {
        throw DimensionError("expected " + std::to_string(scaler.dim()) + " features, got " +
                             std::to_string(raw.size()));
    }
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
        const TreeNode& n = nodes[at];
        at = static_cast<std::size_t>(raw[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[at];
}

double predict_proba(const TreeModel& m, std::span<const double> raw) {
    return std::clamp(m.leaf_for(raw).proba, kProbaClip, 1.0 - kProbaClip);
}

double logit(const TreeModel& m, std::span<const double> raw) {
    const double p = predict_proba(m, raw);
    return std::log(p / (1.0 - p));
}

TreeModel train_tree(const Dataset& train, const TreeConfig& config) {
    if (train.samples.empty()) throw DegenerateData("empty training set");
    if (train.count(FeasibilityLabel::Feasible) == 0 ||
        train.count(FeasibilityLabel::Infeasible) == 0) {
        throw DegenerateData("training set must contain both classes");
    }
    TreeModel model;
    model.max_depth = config.max_depth;
    model.scaler = FeatureScaler::fit(train);
    model.mads = feature_mads(model.scaler, train);
    CartBuilder(train, config).build(model);
    return model;
}

}  // namespace gridcf
