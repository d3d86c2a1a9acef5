#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "gridcf/caseio.hpp"
#include "gridcf/dcopf.hpp"
#include "gridcf/learn.hpp"

namespace gridcf {

// Which buses the search may touch and the MW range each counterfactual
// value must stay in. Frozen buses carry the degenerate range [x_i, x_i].
struct CfConstraints {
    std::vector<bool> actionable;
    std::vector<double> lower;
    std::vector<double> upper;
    bool allow_negative = false;

    // Buses with nonzero nominal load are actionable within [0, x_i]; with
    // allow_negative the lower end becomes -x_i.
    static CfConstraints defaults(const NetworkCase& c, const LoadProfile& x, bool allow_negative = false);

    void freeze(std::size_t bus, const LoadProfile& x);
    std::size_t size() const { return actionable.size(); }
    std::size_t actionable_count() const;

    // Throws DimensionError / Error when the constraints do not fit x.
    void check(const LoadProfile& x) const;
    bool satisfied_by(const LoadProfile& x, const LoadProfile& c) const;

    // Bounds for the exact restoration on the same input: curtailment, or
    // [-x, x] in relaxed mode.
    DemandBounds baseline_bounds(const LoadProfile& x) const;
};

struct CfConfig {
    std::size_t k = 3;
    double lambda1 = 0.5;
    double lambda2 = 1.0;
    std::size_t generations = 200;
    std::size_t population = 30;
    double sparsity_threshold = 0.5;  // MW
    std::uint64_t seed = 0;
    std::size_t tournament = 3;
    std::size_t elites = 2;
    double mutation_sigma = 0.05;  // fraction of each bus bound range
    double reset_probability = 0.3;  // a mutated gene returns to x_i instead
    // Initial options cut 1 + Geometric(init_subset_p) random buses, or with
    // probability init_wide_fraction a uniform-size subset.
    double init_subset_p = 0.35;
    double init_wide_fraction = 0.1;
    std::size_t tighten_steps = 12;  // bisection steps per bus, 0 disables
    // Diversity kernel on the summed (not bus-averaged) distance.
    bool summed_kernel = true;

    void check() const;
};

struct CfObjective {
    double yloss = 0.0;     // mean hinge loss
    double distance = 0.0;  // mean distance to x
    double dpp = 0.0;
    double total = 0.0;
};

struct CfOption {
    LoadProfile profile;
    std::vector<double> delta;  // x - c, positive = curtailment (MW)
    double proba = 0.0;
    double logit = 0.0;
    double distance = 0.0;
    std::size_t changed = 0;
    bool validated = false;

    double total_adjustment() const;
};

struct CounterfactualSet {
    std::vector<CfOption> options;
    CfObjective objective;
    CfConfig config;
    bool exhausted = false;  // fewer than k distinct valid options were found
};

// max(0, 1 - z * logit) with z = -1 for target 0 and z = 1 for target 1.
double hinge_yloss(double logit_value, int target);

// (1/d) sum |a_j - b_j| / max(mad_j, 1e-4) over normalized features.
double distance(std::span<const double> a, std::span<const double> b, std::span<const double> mads);

// det(K) with K_ij = 1 / (1 + distance(c_i, c_j)); with `summed` the kernel
// uses d * distance, the unaveraged sum over features.
double dpp_diversity(const std::vector<std::vector<double>>& normalized, std::span<const double> mads,
                     bool summed = false);

CfObjective cf_objective(const std::vector<LoadProfile>& options, const LoadProfile& x,
                         const ClassifierModel& model, const CfConfig& config);

// Reverts changes smaller than `threshold` MW in ascending order of size,
// keeping each revert only if the option stays classified feasible.
LoadProfile sparsify(const ClassifierModel& model, const LoadProfile& x, const LoadProfile& option,
                     double threshold);

// Shrinks each change (largest first) toward x by bisection while the option
// stays classified feasible with hinge loss no worse than before.
LoadProfile tighten(const ClassifierModel& model, const LoadProfile& x, const LoadProfile& option,
                    std::size_t steps);

// Genetic search over joint k-sets of counterfactuals. Throws
// InputAlreadyFeasible when x is already classified feasible.
CounterfactualSet generate_counterfactuals(const ClassifierModel& model, const LoadProfile& x,
                                           const CfConstraints& constraints, const CfConfig& config);

nlohmann::json cf_config_to_json(const CfConfig& c);
CfConfig cf_config_from_json(const nlohmann::json& j, CfConfig base = {});
nlohmann::json option_to_json(const NetworkCase& c, const CfOption& o);
nlohmann::json counterfactuals_to_json(const NetworkCase& c, const CounterfactualSet& set);

}  // namespace gridcf
