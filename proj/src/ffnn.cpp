#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gridcf/errors.hpp"
#include "gridcf/learn.hpp"

namespace gridcf {

namespace {

void require_both_classes(const Dataset& train) {
    if (train.samples.empty()) throw DegenerateData("empty training set");
    if (train.count(FeasibilityLabel::Feasible) == 0 ||
        train.count(FeasibilityLabel::Infeasible) == 0) {
        throw DegenerateData("training set must contain both classes");
    }
}

// z = W a + b for one layer.
void affine(const DenseLayer& layer, const double* in, double* out) {
    for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double* w = layer.weights.data() + o * layer.inputs;
        double s = layer.bias[o];
        for (std::size_t i = 0; i < layer.inputs; ++i) s += w[i] * in[i];
        out[o] = s;
    }
}

std::array<double, 2> forward(const std::vector<DenseLayer>& layers, std::span<const double> x) {
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> z;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        z.assign(layers[l].outputs, 0.0);
        affine(layers[l], a.data(), z.data());
        if (l + 1 < layers.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        a.swap(z);
    }
    return {a[0], a[1]};
}

struct AdamState {
    std::vector<double> m, v;
};

}  // namespace

std::array<double, 2> ffnn_outputs(const FfnnModel& m, std::span<const double> raw) {
    const std::vector<double> x = m.scaler.normalize(raw);
    return forward(m.layers, x);
}

double logit(const FfnnModel& m, std::span<const double> raw) {
    const auto z = ffnn_outputs(m, raw);
    return z[1] - z[0];
}

double predict_proba(const FfnnModel& m, std::span<const double> raw) {
    return 1.0 / (1.0 + std::exp(-logit(m, raw)));
}

FfnnModel train_ffnn(const Dataset& train, const FfnnConfig& config) {
    require_both_classes(train);
    FfnnModel model;
    model.scaler = FeatureScaler::fit(train);
    model.mads = feature_mads(model.scaler, train);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> widths;
    widths.push_back(train.features());
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(2);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        layer.inputs = widths[l];
        layer.outputs = widths[l + 1];
        const double bound = std::sqrt(1.0 / static_cast<double>(layer.inputs));
        std::uniform_real_distribution<double> init(-bound, bound);
        layer.weights.resize(layer.inputs * layer.outputs);
        for (double& w : layer.weights) w = init(rng);
        layer.bias.resize(layer.outputs);
        for (double& b : layer.bias) b = init(rng);
        model.layers.push_back(std::move(layer));
    }
    const std::size_t depth = model.layers.size();

    std::vector<std::vector<double>> inputs;
    inputs.reserve(train.size());
    for (const auto& s : train.samples) inputs.push_back(model.scaler.normalize(s.profile.demand));

    std::vector<DenseLayer> grads = model.layers;
    std::vector<AdamState> adam_w(depth), adam_b(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        adam_w[l].m.assign(model.layers[l].weights.size(), 0.0);
        adam_w[l].v.assign(model.layers[l].weights.size(), 0.0);
        adam_b[l].m.assign(model.layers[l].bias.size(), 0.0);
        adam_b[l].v.assign(model.layers[l].bias.size(), 0.0);
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    // Per-layer activations (post-ReLU) and deltas for one sample.
    std::vector<std::vector<double>> act(depth + 1), delta(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        act[l + 1].resize(model.layers[l].outputs);
        delta[l].resize(model.layers[l].outputs);
    }

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            for (auto& g : grads) {
                std::fill(g.weights.begin(), g.weights.end(), 0.0);
                std::fill(g.bias.begin(), g.bias.end(), 0.0);
            }
            double weight_sum = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                weight_sum += config.class_weights.of(train.samples[order[k]].label);
            }

            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                const auto& x = inputs[idx];
                act[0] = x;
                for (std::size_t l = 0; l < depth; ++l) {
                    affine(model.layers[l], act[l].data(), act[l + 1].data());
                    if (l + 1 < depth) {
                        for (double& v : act[l + 1]) v = v > 0.0 ? v : 0.0;
                    }
                }
                const auto& out = act[depth];
                const double mx = std::max(out[0], out[1]);
                const double e0 = std::exp(out[0] - mx), e1 = std::exp(out[1] - mx);
                const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
                const int y = static_cast<int>(train.samples[idx].label);
                const double w = config.class_weights.of(train.samples[idx].label) / weight_sum;
                delta[depth - 1][0] = w * (p0 - (y == 0 ? 1.0 : 0.0));
                delta[depth - 1][1] = w * (p1 - (y == 1 ? 1.0 : 0.0));

                for (std::size_t l = depth; l-- > 0;) {
                    const DenseLayer& layer = model.layers[l];
                    DenseLayer& g = grads[l];
                    const auto& a_prev = act[l];
                    const auto& d = delta[l];
                    for (std::size_t o = 0; o < layer.outputs; ++o) {
                        const double dv = d[o];
                        if (dv == 0.0) continue;
                        g.bias[o] += dv;
                        double* gw = g.weights.data() + o * layer.inputs;
                        for (std::size_t i = 0; i < layer.inputs; ++i) gw[i] += dv * a_prev[i];
                    }
                    if (l == 0) break;
                    auto& d_prev = delta[l - 1];
                    std::fill(d_prev.begin(), d_prev.end(), 0.0);
                    for (std::size_t o = 0; o < layer.outputs; ++o) {
                        const double dv = d[o];
                        if (dv == 0.0) continue;
                        const double* wr = layer.weights.data() + o * layer.inputs;
                        for (std::size_t i = 0; i < layer.inputs; ++i) d_prev[i] += wr[i] * dv;
                    }
                    for (std::size_t i = 0; i < d_prev.size(); ++i) {
                        if (a_prev[i] <= 0.0) d_prev[i] = 0.0;
                    }
                }
            }

            beta1_t *= beta1;
            beta2_t *= beta2;
            const double lr = config.learning_rate;
            auto step = [&](std::vector<double>& p, const std::vector<double>& g, AdamState& s) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g[i];
                    s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g[i] * g[i];
                    const double mhat = s.m[i] / (1.0 - beta1_t);
                    const double vhat = s.v[i] / (1.0 - beta2_t);
                    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
                }
            };
            for (std::size_t l = 0; l < depth; ++l) {
                step(model.layers[l].weights, grads[l].weights, adam_w[l]);
                step(model.layers[l].bias, grads[l].bias, adam_b[l]);
            }
        }
    }
    return model;
}

}  // namespace gridcf
