#include <algorithm>
#include <cmath>

#include "gridcf/errors.hpp"
#include "gridcf/learn.hpp"

namespace gridcf {

FeatureScaler FeatureScaler::fit(const Dataset& train) {
    if (train.samples.empty()) throw DegenerateData("cannot fit a scaler on an empty dataset");
    const std::size_t d = train.features();
    FeatureScaler s;
    s.min.assign(d, kInf);
    s.max.assign(d, -kInf);
    for (const auto& sample : train.samples) {
        if (sample.profile.size() != d) throw DimensionError("ragged dataset");
        for (std::size_t j = 0; j < d; ++j) {
            s.min[j] = std::min(s.min[j], sample.profile[j]);
            s.max[j] = std::max(s.max[j], sample.profile[j]);
        }
    }
    return s;
}

double FeatureScaler::range(std::size_t j) const {
    const double r = max[j] - min[j];
    return r > 0.0 ? r : 1.0;
}

std::vector<double> FeatureScaler::normalize(std::span<const double> raw) const {
    if (raw.size() != dim()) {
        throw DimensionError("expected " + std::to_string(dim()) + " features, got " +
                             std::to_string(raw.size()));
    }
    std::vector<double> out(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) out[j] = (raw[j] - min[j]) / range(j);
    return out;
}

std::vector<double> FeatureScaler::denormalize(std::span<const double> scaled) const {
    if (scaled.size() != dim()) throw DimensionError("feature count mismatch");
    std::vector<double> out(scaled.size());
    for (std::size_t j = 0; j < scaled.size(); ++j) out[j] = scaled[j] * range(j) + min[j];
    return out;
}

namespace {

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace

std::vector<double> feature_mads(const FeatureScaler& scaler, const Dataset& train) {
    const std::size_t d = scaler.dim();
    std::vector<double> mads(d, 0.0);
    if (train.samples.empty()) return mads;
    std::vector<double> column(train.size());
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            column[i] = (train.samples[i].profile[j] - scaler.min[j]) / scaler.range(j);
        }
        const double med = median(column);
        for (double& v : column) v = std::abs(v - med);
        mads[j] = median(column);
    }
    return mads;
}

}  // namespace gridcf
