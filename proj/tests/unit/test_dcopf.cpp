#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "gridcf/dcopf.hpp"
#include "gridcf/errors.hpp"
#include "support.hpp"

using namespace gridcf;
using gridcf::testing::data_file;
using gridcf::testing::fixture;

namespace {

NetworkCase two_bus() { return load_case_file(fixture("case2.m")); }
NetworkCase ring() { return load_case_file(fixture("case3_ring.m")); }

// Branch flows of the 3-bus ring (slack bus 1 at angle 0) for given bus
// injections in MW, by Cramer's rule on the reduced 2x2 susceptance system.
std::array<double, 3> ring_flows(const NetworkCase& c, std::array<double, 3> inj) {
    const double b12 = c.branches[0].susceptance, b23 = c.branches[1].susceptance, b13 = c.branches[2].susceptance;
    const double base = c.base_mva;
    const double a11 = b12 + b23, a12 = -b23, a21 = -b23, a22 = b23 + b13;
    const double p2 = inj[1] / base, p3 = inj[2] / base;
    const double det = a11 * a22 - a12 * a21;
    const double t2 = (p2 * a22 - a12 * p3) / det;
    const double t3 = (a11 * p3 - a21 * p2) / det;
    return {b12 * (0.0 - t2) * base, b23 * (t2 - t3) * base, b13 * (0.0 - t3) * base};
}

}  // namespace

TEST(Dcopf, TwoBusSinglePathFlow) {
    const NetworkCase c = two_bus();
    const LinearProgram lp = build_dcopf(c, LoadProfile({0.0, 50.0}));
    const LpOutcome out = solve_lp(lp);
    ASSERT_EQ(out.status, LpStatus::Optimal);
    const DcopfLayout lay{c.bus_count(), c.generators.size()};
    const auto& s = *out.solution;
    const double flow = c.branches[0].susceptance * (s[lay.theta(0)] - s[lay.theta(1)]) * c.base_mva;
    EXPECT_NEAR(flow, 50.0, 1e-5);
    EXPECT_NEAR(s[lay.pg(0)] * c.base_mva, 50.0, 1e-5);  // LP columns are per unit
}

TEST(Dcopf, TwoBusOverLimitLpInfeasible) {
    const NetworkCase c = two_bus();
    EXPECT_EQ(solve_lp(build_dcopf(c, LoadProfile({0.0, 70.0}))).status, LpStatus::Infeasible);
}

TEST(Dcopf, TwoBusLabels) {
    const NetworkCase c = two_bus();
    EXPECT_EQ(check_feasibility(c, LoadProfile({0.0, 50.0})), FeasibilityLabel::Feasible);
    EXPECT_EQ(check_feasibility(c, LoadProfile({0.0, 70.0})), FeasibilityLabel::Infeasible);
    EXPECT_EQ(check_feasibility(c, LoadProfile({0.0, 60.0})), FeasibilityLabel::Feasible);
}

TEST(Dcopf, LengthMismatchIsDimensionError) {
    EXPECT_THROW(check_feasibility(two_bus(), LoadProfile({1.0})), DimensionError);
}

TEST(Dcopf, TwoBusDispatch) {
    const NetworkCase c = two_bus();
    const DispatchSolution d = solve_dispatch(c, LoadProfile({0.0, 50.0}));
    ASSERT_EQ(d.generation.size(), 1u);
    EXPECT_NEAR(d.generation[0], 50.0, 1e-5);
    EXPECT_NEAR(d.flows[0], 50.0, 1e-5);
    EXPECT_NEAR(d.cost, 50.0 * c.generators[0].cost_linear, 1e-4);
    EXPECT_THROW(solve_dispatch(c, LoadProfile({0.0, 70.0})), InfeasibleInput);
}

TEST(Dcopf, CheapGeneratorServesFirst) {
    NetworkCase c = two_bus();
    c.generators[0].cost_linear = 2.0;
    Generator cheap = c.generators[0];
    cheap.cost_linear = 1.0;
    c.generators.push_back(cheap);
    const DispatchSolution d = solve_dispatch(c, LoadProfile({0.0, 50.0}));
    EXPECT_NEAR(d.generation[0], 0.0, 1e-5);
    EXPECT_NEAR(d.generation[1], 50.0, 1e-5);
    EXPECT_NEAR(d.cost, 50.0, 1e-4);
}

TEST(Dcopf, RingFlowSplitMatchesAngleSystem) {
    const NetworkCase c = ring();
    const LoadProfile p({0.0, 0.0, 60.0});
    const DispatchSolution d = solve_dispatch(c, p);
    // Cheap generator at bus 1 carries everything while no limit binds.
    ASSERT_NEAR(d.generation[0], 60.0, 1e-5);
    const auto expect = ring_flows(c, {60.0, 0.0, -60.0});
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(d.flows[k], expect[k], 1e-5) << "branch " << k;
}

TEST(Dcopf, BindingLimitMatchesGridSearch) {
    NetworkCase c = ring();
    c.branches[0].flow_limit = 30.0;
    const double load = 60.0;
    double best_cost = std::numeric_limits<double>::infinity(), best_g1 = -1.0;
    for (int step = 0; step <= 600; ++step) {
        const double g1 = 0.1 * step, g2 = load - g1;
        if (g2 < 0.0 || g2 > c.generators[1].p_max) continue;
        const auto f = ring_flows(c, {g1, g2, -load});
        bool ok = true;
        for (std::size_t k = 0; k < 3; ++k) ok = ok && std::abs(f[k]) <= c.branches[k].flow_limit + 1e-9;
        const double cost = g1 * c.generators[0].cost_linear + g2 * c.generators[1].cost_linear;
        if (ok && cost < best_cost) {
            best_cost = cost;
            best_g1 = g1;
        }
    }
    ASSERT_GE(best_g1, 0.0);
    const DispatchSolution d = solve_dispatch(c, LoadProfile({0.0, 0.0, load}));
    EXPECT_NEAR(d.generation[0], best_g1, 0.1 + 1e-6);
    EXPECT_NEAR(d.cost, best_cost, 0.1 * 4.0 + 1e-6);
    EXPECT_LE(std::abs(d.flows[0]), 30.0 + 1e-6);
    EXPECT_LE(d.cost, best_cost + 1e-6);
}

TEST(Dcopf, BaselineShedsExactlyTheExcess) {
    const NetworkCase c = two_bus();
    const RestorationResult r = restore_baseline(c, LoadProfile({0.0, 70.0}));
    EXPECT_NEAR(r.served_demand[0], 0.0, 1e-6);
    EXPECT_NEAR(r.served_demand[1], 60.0, 1e-6);
    EXPECT_NEAR(r.delta[0], 0.0, 1e-6);
    EXPECT_NEAR(r.delta[1], 10.0, 1e-6);
    EXPECT_NEAR(r.total_adjustment, 10.0, 1e-6);
}

TEST(Dcopf, BaselineOnFeasibleProfileIsZero) {
    const NetworkCase c = two_bus();
    const RestorationResult r = restore_baseline(c, LoadProfile({0.0, 40.0}));
    EXPECT_NEAR(r.total_adjustment, 0.0, 1e-9);
    for (double d : r.delta) EXPECT_NEAR(d, 0.0, 1e-9);
}

TEST(Dcopf, BaselineServedProfileIsFeasible) {
    const NetworkCase c = load_case_file(data_file("pglib_opf_case30_ieee.m"));
    LoadProfile p(c.nominal_loads());
    for (double& v : p.demand) v *= 1.6;
    ASSERT_EQ(check_feasibility(c, p), FeasibilityLabel::Infeasible);
    const RestorationResult r = restore_baseline(c, p);
    EXPECT_GT(r.total_adjustment, 0.0);
    EXPECT_EQ(check_feasibility(c, LoadProfile(r.served_demand)), FeasibilityLabel::Feasible);
    double l1 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_NEAR(r.delta[i], p[i] - r.served_demand[i], 1e-9);
        EXPECT_GE(r.served_demand[i], -1e-9);
        EXPECT_LE(r.served_demand[i], p[i] + 1e-9);
        l1 += std::abs(r.delta[i]);
    }
    EXPECT_NEAR(l1, r.total_adjustment, 1e-6);
}

TEST(Dcopf, StructuralInfeasibilityUnderTightBounds) {
    const NetworkCase c = two_bus();
    const LoadProfile p({0.0, 70.0});
    DemandBounds fixed{{0.0, 70.0}, {0.0, 70.0}};
    EXPECT_THROW(restore_baseline(c, p, fixed), StructurallyInfeasible);
}

// Nominal feasibility and cost were confirmed with an independent scipy/HiGHS
// DC-OPF (tests/oracles/dcopf_oracle.py --cost): 7506.477279 $/h.
TEST(Dcopf, Pglib30NominalFeasibleAtOracleCost) {
    const NetworkCase c = load_case_file(data_file("pglib_opf_case30_ieee.m"));
    const LoadProfile nominal(c.nominal_loads());
    EXPECT_EQ(check_feasibility(c, nominal), FeasibilityLabel::Feasible);
    EXPECT_NEAR(solve_dispatch(c, nominal).cost, 7506.477279, 1e-3);
}

TEST(Dcopf, Pglib300ScaledNominalAtOracleCost) {
    const NetworkCase c = load_case_file(data_file("pglib_opf_case300_ieee.m"), 1.12);
    const LoadProfile nominal(c.nominal_loads());
    EXPECT_EQ(check_feasibility(c, nominal), FeasibilityLabel::Feasible);
    EXPECT_NEAR(solve_dispatch(c, nominal).cost, 504054.735043, 1e-2);
}
