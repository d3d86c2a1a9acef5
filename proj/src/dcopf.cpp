#include "gridcf/dcopf.hpp"

#include <cmath>
#include <numeric>

#include "gridcf/errors.hpp"

namespace gridcf {

namespace {

constexpr double kCleanMw = 1e-9;

void require_profile(const NetworkCase& c, const LoadProfile& p) {
    if (p.size() != c.bus_count()) {
        throw DimensionError("profile has " + std::to_string(p.size()) + " entries, case has " +
                             std::to_string(c.bus_count()) + " buses");
    }
}

// Adds the network rows shared by dispatch and restoration: bus balance
// (with the demand on the right-hand side) and two-sided flow limits.
// Columns beyond the DcopfLayout are left at zero for the caller.
void add_network_rows(LinearProgram& lp, const NetworkCase& c, const LoadProfile& p,
                      const DcopfLayout& lay) {
    const double base = c.base_mva;
    const std::size_t n = lay.buses;
    for (std::size_t i = 0; i < n; ++i) {
        lp.add_equality((p[i] - c.buses[i].fixed_injection) / base);
    }
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        lp.eq_matrix(c.generators[g].bus, lay.pg(g)) += 1.0;
    }
    // Flow leaving bus f on branch (f,t) is b (theta_f - theta_t).
    for (const auto& br : c.branches) {
        const std::size_t f = br.from_bus, t = br.to_bus;
        const double b = br.susceptance;
        lp.eq_matrix(f, lay.theta(f)) -= b;
        lp.eq_matrix(f, lay.theta(t)) += b;
        lp.eq_matrix(t, lay.theta(t)) -= b;
        lp.eq_matrix(t, lay.theta(f)) += b;
    }
    for (const auto& br : c.branches) {
        const double limit = br.flow_limit / base;
        auto up = lp.add_inequality(limit);
        up[lay.theta(br.from_bus)] = br.susceptance;
        up[lay.theta(br.to_bus)] = -br.susceptance;
        auto down = lp.add_inequality(limit);
        down[lay.theta(br.from_bus)] = -br.susceptance;
        down[lay.theta(br.to_bus)] = br.susceptance;
    }
}

void set_network_bounds(LinearProgram& lp, const NetworkCase& c, const DcopfLayout& lay) {
    for (std::size_t i = 0; i < lay.buses; ++i) {
        lp.lower[lay.theta(i)] = -kInf;
        lp.upper[lay.theta(i)] = kInf;
    }
    lp.lower[lay.theta(c.slack_bus)] = 0.0;
    lp.upper[lay.theta(c.slack_bus)] = 0.0;
    for (std::size_t g = 0; g < lay.generators; ++g) {
        lp.lower[lay.pg(g)] = c.generators[g].p_min / c.base_mva;
        lp.upper[lay.pg(g)] = c.generators[g].p_max / c.base_mva;
    }
}

DispatchSolution extract_dispatch(const NetworkCase& c, const DcopfLayout& lay,
                                  const std::vector<double>& x) {
    DispatchSolution d;
    const double base = c.base_mva;
    d.angles.resize(lay.buses);
    for (std::size_t i = 0; i < lay.buses; ++i) d.angles[i] = x[lay.theta(i)];
    d.generation.resize(lay.generators);
    for (std::size_t g = 0; g < lay.generators; ++g) {
        d.generation[g] = x[lay.pg(g)] * base;
        d.cost += c.generators[g].cost_linear * d.generation[g];
    }
    d.flows.reserve(c.branches.size());
    for (const auto& br : c.branches) {
        d.flows.push_back(br.susceptance * (d.angles[br.from_bus] - d.angles[br.to_bus]) * base);
    }
    return d;
}

}  // namespace

double LoadProfile::total() const { return std::accumulate(demand.begin(), demand.end(), 0.0); }

std::string to_string(FeasibilityLabel label) {
    return label == FeasibilityLabel::Feasible ? "feasible" : "infeasible";
}

DemandBounds DemandBounds::curtailment(const LoadProfile& p) {
    DemandBounds b;
    b.lower.assign(p.size(), 0.0);
    b.upper = p.demand;
    return b;
}

LinearProgram build_dcopf(const NetworkCase& c, const LoadProfile& profile) {
    require_profile(c, profile);
    const DcopfLayout lay{c.bus_count(), c.generators.size()};
    LinearProgram lp(lay.size());
    add_network_rows(lp, c, profile, lay);
    set_network_bounds(lp, c, lay);
    // Objective in $/h per per-unit of generation.
    for (std::size_t g = 0; g < lay.generators; ++g) {
        lp.objective[lay.pg(g)] = c.generators[g].cost_linear * c.base_mva;
    }
    return lp;
}

FeasibilityLabel check_feasibility(const NetworkCase& c, const LoadProfile& profile) {
    const LinearProgram lp = build_dcopf(c, profile);
    LpOptions opt;
    opt.phase1_only = true;
    const LpOutcome out = solve_lp(lp, opt);
    return out.status == LpStatus::Optimal ? FeasibilityLabel::Feasible
                                           : FeasibilityLabel::Infeasible;
}

DispatchSolution solve_dispatch(const NetworkCase& c, const LoadProfile& profile) {
    const LinearProgram lp = build_dcopf(c, profile);
    const LpOutcome out = solve_lp(lp);
    if (out.status != LpStatus::Optimal) {
        throw InfeasibleInput("load profile admits no feasible dispatch");
    }
    const DcopfLayout lay{c.bus_count(), c.generators.size()};
    return extract_dispatch(c, lay, *out.solution);
}

RestorationResult restore_baseline(const NetworkCase& c, const LoadProfile& profile,
                                   const std::optional<DemandBounds>& bounds) {
    require_profile(c, profile);
    const DemandBounds b = bounds ? *bounds : DemandBounds::curtailment(profile);
    const std::size_t n = c.bus_count();
    if (b.lower.size() != n || b.upper.size() != n) {
        throw DimensionError("restoration bounds do not match the bus count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (b.lower[i] > b.upper[i]) {
            throw StructurallyInfeasible("bus " + std::to_string(c.buses[i].id) +
                                         " has lower bound above upper bound");
        }
    }

    // served = p_d - shed + raise, both parts non-negative; |delta| is
    // linearized as shed + raise.
    const DcopfLayout lay{n, c.generators.size()};
    const std::size_t shed0 = lay.size();
    const std::size_t raise0 = shed0 + n;
    LinearProgram lp(lay.size() + 2 * n);
    add_network_rows(lp, c, profile, lay);
    set_network_bounds(lp, c, lay);
    const double base = c.base_mva;
    for (std::size_t i = 0; i < n; ++i) {
        const double pd = profile[i];
        lp.eq_matrix(i, shed0 + i) = 1.0;
        lp.eq_matrix(i, raise0 + i) = -1.0;
        lp.lower[shed0 + i] = std::max(0.0, pd - b.upper[i]) / base;
        lp.upper[shed0 + i] = std::max(0.0, pd - b.lower[i]) / base;
        lp.lower[raise0 + i] = std::max(0.0, b.lower[i] - pd) / base;
        lp.upper[raise0 + i] = std::max(0.0, b.upper[i] - pd) / base;
        lp.objective[shed0 + i] = 1.0;
        lp.objective[raise0 + i] = 1.0;
    }
    const LpOutcome out = solve_lp(lp);
    if (out.status != LpStatus::Optimal) {
        throw StructurallyInfeasible("no dispatch exists even at the most permissive bounds");
    }
    const std::vector<double>& x = *out.solution;

    RestorationResult r;
    r.served_demand.resize(n);
    r.delta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = (x[shed0 + i] - x[raise0 + i]) * base;
        if (std::abs(d) < kCleanMw) d = 0.0;
        double served = profile[i] - d;
        served = std::min(std::max(served, b.lower[i]), b.upper[i]);
        r.served_demand[i] = served;
        r.delta[i] = profile[i] - served;
        r.total_adjustment += std::abs(r.delta[i]);
    }
    r.dispatch = extract_dispatch(c, lay, x);
    return r;
}

}  // namespace gridcf
