#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcf/caseio.hpp"
#include "gridcf/lpcore.hpp"

namespace gridcf {

// Per-bus active demand in MW, aligned with NetworkCase bus order.
struct LoadProfile {
    std::vector<double> demand;

    LoadProfile() = default;
    explicit LoadProfile(std::vector<double> d) : demand(std::move(d)) {}

    std::size_t size() const { return demand.size(); }
    double operator[](std::size_t i) const { return demand[i]; }
    double& operator[](std::size_t i) { return demand[i]; }
    double total() const;

    bool operator==(const LoadProfile&) const = default;
};

// Numeric values match the dataset encoding: 0 infeasible, 1 feasible.
enum class FeasibilityLabel : int { Infeasible = 0, Feasible = 1 };

std::string to_string(FeasibilityLabel label);

struct DispatchSolution {
    std::vector<double> generation;  // MW per generator
    std::vector<double> angles;      // rad per bus
    std::vector<double> flows;       // MW per branch, positive from -> to
    double cost = 0.0;               // linear cost, $/h
};

// Per-bus admissible range for the served demand (MW).
struct DemandBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    // [0, p_d] per bus: curtailment only.
    static DemandBounds curtailment(const LoadProfile& p);
};

struct RestorationResult {
    std::vector<double> served_demand;  // MW actually served
    std::vector<double> delta;          // p_d - served, positive = curtailment
    DispatchSolution dispatch;
    double total_adjustment = 0.0;      // L1 norm of delta, MW
};

// Column layout of the LP built by build_dcopf: angles first, then generators.
struct DcopfLayout {
    std::size_t buses = 0;
    std::size_t generators = 0;
    std::size_t theta(std::size_t bus) const { return bus; }
    std::size_t pg(std::size_t gen) const { return buses + gen; }
    std::size_t size() const { return buses + generators; }
};

LinearProgram build_dcopf(const NetworkCase& c, const LoadProfile& profile);

FeasibilityLabel check_feasibility(const NetworkCase& c, const LoadProfile& profile);

// Minimum linear-cost dispatch; throws InfeasibleInput for infeasible profiles.
DispatchSolution solve_dispatch(const NetworkCase& c, const LoadProfile& profile);

// Minimum L1 demand adjustment restoring feasibility. Bounds default to
// DemandBounds::curtailment(profile).
RestorationResult restore_baseline(const NetworkCase& c, const LoadProfile& profile,
                                   const std::optional<DemandBounds>& bounds = std::nullopt);

}  // namespace gridcf
