#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gridcf/datagen.hpp"

namespace gridcf {

// Per-feature min/max scaling to [0, 1], fit on training data only.
struct FeatureScaler {
    std::vector<double> min;
    std::vector<double> max;

    static FeatureScaler fit(const Dataset& train);

    std::size_t dim() const { return min.size(); }
    double range(std::size_t j) const;
    std::vector<double> normalize(std::span<const double> raw) const;
    std::vector<double> denormalize(std::span<const double> scaled) const;
};

// Median absolute deviation of each normalized training feature.
std::vector<double> feature_mads(const FeatureScaler& scaler, const Dataset& train);

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // outputs x inputs, row-major
    std::vector<double> bias;
};

// input -> 20 -> 20 -> 20 -> 20 -> 2 with ReLU on hidden layers. Output
// index 0 is Infeasible, 1 is Feasible.
struct FfnnModel {
    FeatureScaler scaler;
    std::vector<double> mads;
    std::vector<DenseLayer> layers;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // raw MW; go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    int depth = 0;
    std::size_t count_feasible = 0;
    std::size_t count_infeasible = 0;
    double proba = 0.5;  // class-weighted fraction of Feasible

    bool is_leaf() const { return feature < 0; }
};

struct TreeModel {
    FeatureScaler scaler;
    std::vector<double> mads;
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int max_depth = 4;

    int depth() const;
    const TreeNode& leaf_for(std::span<const double> raw) const;
};

using ClassifierModel = std::variant<FfnnModel, TreeModel>;

struct ClassWeights {
    double infeasible = 2.0;
    double feasible = 1.0;
    double of(FeasibilityLabel l) const { return l == FeasibilityLabel::Feasible ? feasible : infeasible; }
};

struct FfnnConfig {
    std::size_t epochs = 300;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::vector<std::size_t> hidden{20, 20, 20, 20};
    ClassWeights class_weights;
    std::uint64_t seed = 0;
};

struct TreeConfig {
    int max_depth = 4;
    ClassWeights class_weights;
    std::size_t min_samples_split = 2;
};

struct Metrics {
    double accuracy = 0.0;
    // confusion[true][predicted], index 0 = Infeasible, 1 = Feasible.
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    double false_feasible_rate = 0.0;  // infeasible samples predicted feasible
    std::size_t total() const;
};

FfnnModel train_ffnn(const Dataset& train, const FfnnConfig& config = {});
TreeModel train_tree(const Dataset& train, const TreeConfig& config = {});

// Pre-softmax pair (infeasible, feasible).
std::array<double, 2> ffnn_outputs(const FfnnModel& m, std::span<const double> raw);

double predict_proba(const FfnnModel& m, std::span<const double> raw);
double predict_proba(const TreeModel& m, std::span<const double> raw);
double predict_proba(const ClassifierModel& m, std::span<const double> raw);
double logit(const FfnnModel& m, std::span<const double> raw);
double logit(const TreeModel& m, std::span<const double> raw);
double logit(const ClassifierModel& m, std::span<const double> raw);

inline FeasibilityLabel predict_label(const ClassifierModel& m, std::span<const double> raw) {
    return predict_proba(m, raw) > 0.5 ? FeasibilityLabel::Feasible : FeasibilityLabel::Infeasible;
}

// Tree probabilities are clipped to this band so that logit stays finite.
inline constexpr double kProbaClip = 1e-6;

const FeatureScaler& scaler_of(const ClassifierModel& m);
const std::vector<double>& mads_of(const ClassifierModel& m);
std::string kind_of(const ClassifierModel& m);  // "ffnn" or "tree"

Metrics evaluate(const ClassifierModel& m, const Dataset& test);
Metrics evaluate(const std::function<double(const LoadProfile&)>& proba, const Dataset& test);

nlohmann::json metrics_to_json(const Metrics& m);
Metrics metrics_from_json(const nlohmann::json& j);

struct StoredModel {
    ClassifierModel model;
    std::optional<Metrics> metrics;
};

nlohmann::json model_to_json(const ClassifierModel& m, const std::optional<Metrics>& metrics = {});
StoredModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ClassifierModel& m,
                const std::optional<Metrics>& metrics = {});
StoredModel load_model(const std::string& path);

}  // namespace gridcf
