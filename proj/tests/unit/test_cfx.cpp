#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "gridcf/cfx.hpp"
#include "gridcf/errors.hpp"
#include "support.hpp"

using namespace gridcf;

namespace {

FfnnModel constant_network(std::size_t d, double z_infeasible, double z_feasible) {
    FfnnModel m;
    m.scaler.min.assign(d, 0.0);
    m.scaler.max.assign(d, 1.0);
    m.mads.assign(d, 0.1);
    m.layers.push_back(DenseLayer{d, 2, std::vector<double>(2 * d, 0.0), {z_infeasible, z_feasible}});
    return m;
}

TreeNode split(int feature, double threshold, int left, int right, int depth) {
    TreeNode n;
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    n.depth = depth;
    return n;
}

TreeNode leaf(double p, int depth) {
    TreeNode n;
    n.proba = p;
    n.depth = depth;
    return n;
}

TreeModel two_feature_tree(std::vector<TreeNode> nodes) {
    TreeModel t;
    t.scaler.min = {0.0, 0.0};
    t.scaler.max = {100.0, 100.0};
    t.mads = {0.1, 0.1};
    t.nodes = std::move(nodes);
    return t;
}

struct Infeasibles {
    std::vector<LoadProfile> ffnn, dt;
};

// Test profiles that are truly infeasible and classified infeasible.
const Infeasibles& infeasibles() {
    static const Infeasibles inf = [] {
        const auto& t = gridcf::testing::trained_case30();
        Infeasibles out;
        for (const Sample& s : t.split.test.samples) {
            if (s.label != FeasibilityLabel::Infeasible) continue;
            if (predict_proba(ClassifierModel(t.ffnn), s.profile.demand) <= 0.5) out.ffnn.push_back(s.profile);
            if (predict_proba(ClassifierModel(t.tree), s.profile.demand) <= 0.5) out.dt.push_back(s.profile);
        }
        return out;
    }();
    return inf;
}

CfConfig quick(std::uint64_t seed) {
    CfConfig c;
    c.seed = seed;
    c.generations = 80;
    return c;
}

}  // namespace

TEST(Cfx, HingeExamples) {
    EXPECT_DOUBLE_EQ(hinge_yloss(2.0, 1), 0.0);
    EXPECT_DOUBLE_EQ(hinge_yloss(0.0, 1), 1.0);
    EXPECT_DOUBLE_EQ(hinge_yloss(-2.0, 0), 0.0);
    EXPECT_DOUBLE_EQ(hinge_yloss(0.5, 1), 0.5);
    EXPECT_DOUBLE_EQ(hinge_yloss(0.5, 0), 1.5);
}

TEST(Cfx, DistanceExamples) {
    const std::vector<double> a{1.0, 2.0}, b{2.0, 4.0}, mads{1.0, 2.0};
    EXPECT_DOUBLE_EQ(distance(a, a, mads), 0.0);
    EXPECT_DOUBLE_EQ(distance(a, b, mads), 1.0);
    // MAD floor 1e-4
    const std::vector<double> z{0.0, 0.0}, w{1e-4, 0.0}, flat{0.0, 1.0};
    EXPECT_NEAR(distance(z, w, flat), 0.5, 1e-12);
    EXPECT_THROW(distance(a, std::vector<double>{1.0}, mads), DimensionError);
}

TEST(Cfx, DistanceSymmetric) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a(7), b(7), m(7);
        for (int j = 0; j < 7; ++j) {
            a[j] = u(rng);
            b[j] = u(rng);
            m[j] = u(rng) * 0.3;
        }
        EXPECT_DOUBLE_EQ(distance(a, b, m), distance(b, a, m));
    }
}

TEST(Cfx, DppExamples) {
    const std::vector<double> mads{1.0, 2.0};
    EXPECT_DOUBLE_EQ(dpp_diversity({{1.0, 2.0}}, mads), 1.0);
    EXPECT_NEAR(dpp_diversity({{1.0, 2.0}, {1.0, 2.0}}, mads), 0.0, 1e-15);
    EXPECT_NEAR(dpp_diversity({{1.0, 2.0}, {2.0, 4.0}}, mads), 0.75, 1e-12);
    // Summed kernel: distance 1 averaged over d = 2 becomes 2.
    EXPECT_NEAR(dpp_diversity({{1.0, 2.0}, {2.0, 4.0}}, mads, true), 1.0 - 1.0 / 9.0, 1e-12);
}

TEST(Cfx, ObjectiveArithmetic) {
    const ClassifierModel m = constant_network(1, 0.0, 2.0);  // logit 2 everywhere
    CfConfig cfg;
    cfg.lambda1 = 0.5;
    cfg.lambda2 = 1.0;
    const LoadProfile x({0.5});
    const CfObjective o = cf_objective({LoadProfile({0.52})}, x, m, cfg);
    EXPECT_NEAR(o.yloss, 0.0, 1e-12);
    EXPECT_NEAR(o.distance, 0.2, 1e-12);
    EXPECT_NEAR(o.dpp, 1.0, 1e-12);
    EXPECT_NEAR(o.total, -0.9, 1e-12);
}

TEST(Cfx, ObjectiveWithoutPenaltiesIsMeanYloss) {
    const ClassifierModel m = constant_network(2, 0.0, 0.5);  // hinge 0.5
    CfConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    const LoadProfile x({0.5, 0.5});
    const CfObjective o = cf_objective({LoadProfile({0.1, 0.2}), LoadProfile({0.3, 0.4})}, x, m, cfg);
    EXPECT_NEAR(o.total, 0.5, 1e-12);
    EXPECT_NEAR(o.total, o.yloss, 1e-12);
}

TEST(Cfx, SparsifyRevertsIrrelevantTinyChange) {
    // feasible iff x1 <= 40
    const ClassifierModel m = two_feature_tree({split(1, 40.0, 1, 2, 0), leaf(0.9, 1), leaf(0.1, 1)});
    const LoadProfile x({10.0, 50.0});
    const LoadProfile option({10.0 - 1e-6, 30.0});
    const LoadProfile s = sparsify(m, x, option, 0.5);
    EXPECT_EQ(s[0], 10.0);
    EXPECT_EQ(s[1], 30.0);
}

TEST(Cfx, SparsifyKeepsNecessaryChanges) {
    // feasible iff x1 <= 40 and x0 <= 9.8
    const ClassifierModel m = two_feature_tree(
        {split(1, 40.0, 1, 2, 0), split(0, 9.8, 3, 4, 1), leaf(0.1, 1), leaf(0.9, 2), leaf(0.1, 2)});
    const LoadProfile x({10.0, 40.3});
    const LoadProfile option({9.7, 39.9});
    EXPECT_EQ(sparsify(m, x, option, 0.5), option);
}

TEST(Cfx, TightenStopsAtTheThreshold) {
    const ClassifierModel m = two_feature_tree({split(1, 40.0, 1, 2, 0), leaf(0.9, 1), leaf(0.1, 1)});
    const LoadProfile x({10.0, 50.0});
    const LoadProfile t = tighten(m, x, LoadProfile({5.0, 20.0}), 30);
    EXPECT_EQ(t[0], 10.0);
    EXPECT_LE(t[1], 40.0);
    EXPECT_NEAR(t[1], 40.0, 1e-6);
}

TEST(Cfx, ConstraintDefaults) {
    const auto& net = gridcf::testing::trained_case30().network;
    const LoadProfile x(net.nominal_loads());
    const CfConstraints c = CfConstraints::defaults(net, x);
    std::size_t loaded = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool has_load = net.buses[i].nominal_load != 0.0;
        loaded += has_load;
        EXPECT_EQ(c.actionable[i], has_load);
        EXPECT_DOUBLE_EQ(c.upper[i], x[i]);
        EXPECT_DOUBLE_EQ(c.lower[i], has_load ? 0.0 : x[i]);
    }
    EXPECT_EQ(c.actionable_count(), loaded);
    const CfConstraints relaxed = CfConstraints::defaults(net, x, true);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (relaxed.actionable[i]) EXPECT_DOUBLE_EQ(relaxed.lower[i], -x[i]);
    }
    EXPECT_THROW(c.check(LoadProfile({1.0})), DimensionError);
}

TEST(Cfx, ConfigValidation) {
    CfConfig c;
    c.k = 0;
    EXPECT_THROW(c.check(), Error);
    c = {};
    c.lambda1 = -1.0;
    EXPECT_THROW(c.check(), Error);
    c = {};
    c.reset_probability = 1.5;
    EXPECT_THROW(c.check(), Error);
    const CfConfig back = cf_config_from_json(cf_config_to_json(quick(77)));
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.generations, 80u);
}

TEST(Cfx, FeasibleInputRejected) {
    const auto& t = gridcf::testing::trained_case30();
    std::vector<double> light = t.network.nominal_loads();
    for (double& v : light) v *= 0.4;
    const LoadProfile x(light);
    const ClassifierModel m(t.ffnn);
    ASSERT_GT(predict_proba(m, x.demand), 0.5);
    EXPECT_THROW(generate_counterfactuals(m, x, CfConstraints::defaults(t.network, x), quick(1)),
                 InputAlreadyFeasible);
}

TEST(Cfx, DimensionMismatchRejected) {
    const auto& t = gridcf::testing::trained_case30();
    const LoadProfile x({1.0, 2.0});
    CfConstraints c;
    c.actionable = {true, true};
    c.lower = {0.0, 0.0};
    c.upper = {1.0, 2.0};
    EXPECT_THROW(generate_counterfactuals(ClassifierModel(t.tree), x, c, quick(1)), DimensionError);
}

TEST(Cfx, KThreeSetIsDiverseAndValid) {
    const auto& t = gridcf::testing::trained_case30();
    for (const ClassifierModel& m : {ClassifierModel(t.ffnn), ClassifierModel(t.tree)}) {
        const auto& pool = kind_of(m) == "ffnn" ? infeasibles().ffnn : infeasibles().dt;
        ASSERT_GE(pool.size(), 5u);
        for (std::size_t i = 0; i < 5; ++i) {
            const LoadProfile& x = pool[i];
            const CounterfactualSet set = generate_counterfactuals(m, x, CfConstraints::defaults(t.network, x), quick(i));
            ASSERT_EQ(set.options.size(), 3u) << kind_of(m) << " instance " << i;
            EXPECT_FALSE(set.exhausted);
            std::vector<std::vector<double>> normalized;
            for (const CfOption& o : set.options) {
                EXPECT_GT(o.proba, 0.5);
                EXPECT_GT(o.changed, 0u);
                normalized.push_back(scaler_of(m).normalize(o.profile.demand));
            }
            for (std::size_t a = 0; a < 3; ++a) {
                for (std::size_t b = a + 1; b < 3; ++b) {
                    EXPECT_GT(distance(normalized[a], normalized[b], mads_of(m)), 0.0);
                }
            }
            EXPECT_GT(dpp_diversity(normalized, mads_of(m)), 0.0);
            EXPECT_GT(set.objective.dpp, 0.0);
        }
    }
}

TEST(Cfx, ReportedObjectiveMatchesRecomputation) {
    const auto& t = gridcf::testing::trained_case30();
    const ClassifierModel m(t.ffnn);
    const LoadProfile& x = infeasibles().ffnn.front();
    const CfConfig cfg = quick(3);
    const CounterfactualSet set = generate_counterfactuals(m, x, CfConstraints::defaults(t.network, x), cfg);
    ASSERT_FALSE(set.options.empty());
    const auto xn = scaler_of(m).normalize(x.demand);
    double yl = 0.0, dist = 0.0;
    std::vector<std::vector<double>> normalized;
    for (const CfOption& o : set.options) {
        yl += std::max(0.0, 1.0 - logit(m, o.profile.demand));
        const auto on = scaler_of(m).normalize(o.profile.demand);
        dist += distance(on, xn, mads_of(m));
        normalized.push_back(on);
        double l1 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            EXPECT_DOUBLE_EQ(o.delta[j], x[j] - o.profile[j]);
            l1 += std::abs(o.delta[j]);
        }
        EXPECT_NEAR(o.total_adjustment(), l1, 1e-9);
    }
    const double k = static_cast<double>(set.options.size());
    const double dpp = dpp_diversity(normalized, mads_of(m), cfg.summed_kernel);
    EXPECT_NEAR(set.objective.yloss, yl / k, 1e-9);
    EXPECT_NEAR(set.objective.distance, dist / k, 1e-9);
    EXPECT_NEAR(set.objective.dpp, dpp, 1e-9);
    EXPECT_NEAR(set.objective.total, yl / k + cfg.lambda1 * dist / k - cfg.lambda2 * dpp, 1e-9);
}

TEST(Cfx, SameSeedSameOptions) {
    const auto& t = gridcf::testing::trained_case30();
    const ClassifierModel m(t.tree);
    const LoadProfile& x = infeasibles().dt.front();
    const auto c = CfConstraints::defaults(t.network, x);
    const auto a = generate_counterfactuals(m, x, c, quick(9));
    const auto b = generate_counterfactuals(m, x, c, quick(9));
    ASSERT_EQ(a.options.size(), b.options.size());
    for (std::size_t i = 0; i < a.options.size(); ++i) EXPECT_EQ(a.options[i].profile, b.options[i].profile);
}

TEST(Cfx, FreezeAndBoundsRespectedOverSeededRuns) {
    const auto& t = gridcf::testing::trained_case30();
    std::mt19937_64 rng(2024);
    for (int run = 0; run < 100; ++run) {
        const bool use_tree = run % 2 == 1;
        const ClassifierModel m = use_tree ? ClassifierModel(t.tree) : ClassifierModel(t.ffnn);
        const auto& pool = use_tree ? infeasibles().dt : infeasibles().ffnn;
        const LoadProfile& x = pool[static_cast<std::size_t>(run) % pool.size()];
        CfConstraints c = CfConstraints::defaults(t.network, x, run % 5 == 0);
        std::vector<std::size_t> act;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (c.actionable[i]) act.push_back(i);
        }
        std::shuffle(act.begin(), act.end(), rng);
        const std::size_t n_freeze = 1 + static_cast<std::size_t>(run % 4);
        std::set<std::size_t> frozen(act.begin(), act.begin() + static_cast<long>(n_freeze));
        for (std::size_t b : frozen) c.freeze(b, x);

        CfConfig cfg = quick(static_cast<std::uint64_t>(run));
        cfg.generations = 40;
        const CounterfactualSet set = generate_counterfactuals(m, x, c, cfg);
        for (const CfOption& o : set.options) {
            EXPECT_TRUE(c.satisfied_by(x, o.profile)) << "run " << run;
            for (std::size_t b : frozen) EXPECT_EQ(o.delta[b], 0.0) << "run " << run << " bus " << b;
            for (std::size_t i = 0; i < x.size(); ++i) {
                EXPECT_GE(o.profile[i], c.lower[i]);
                EXPECT_LE(o.profile[i], c.upper[i]);
            }
        }
    }
}

TEST(Cfx, SparsifyAndTightenProperties) {
    const auto& t = gridcf::testing::trained_case30();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int trials = 0;
    for (const ClassifierModel& m : {ClassifierModel(t.ffnn), ClassifierModel(t.tree)}) {
        const auto& pool = kind_of(m) == "ffnn" ? infeasibles().ffnn : infeasibles().dt;
        for (std::size_t i = 0; i < 40; ++i) {
            const LoadProfile& x = pool[i % pool.size()];
            // Random curtailment deep enough to cross into the feasible class.
            LoadProfile option = x;
            for (int attempt = 0; attempt < 20 && predict_proba(m, option.demand) <= 0.5; ++attempt) {
                for (std::size_t j = 0; j < x.size(); ++j) option[j] = x[j] * (1.0 - 0.6 * u(rng) * (attempt + 1) / 20.0);
            }
            if (predict_proba(m, option.demand) <= 0.5) continue;
            ++trials;
            auto changed = [&](const LoadProfile& p) {
                std::size_t n = 0;
                for (std::size_t j = 0; j < x.size(); ++j) n += p[j] != x[j];
                return n;
            };
            const LoadProfile s = sparsify(m, x, option, 2.0);
            EXPECT_LE(changed(s), changed(option));
            EXPECT_GT(predict_proba(m, s.demand), 0.5);
            const LoadProfile tt = tighten(m, x, s, 12);
            EXPECT_LE(changed(tt), changed(s));
            EXPECT_GT(predict_proba(m, tt.demand), 0.5);
            for (std::size_t j = 0; j < x.size(); ++j) {
                EXPECT_LE(std::abs(tt[j] - x[j]), std::abs(s[j] - x[j]) + 1e-12);
                EXPECT_GE((tt[j] - x[j]) * (s[j] - x[j]), 0.0);
            }
        }
    }
    EXPECT_GT(trials, 40);
}

TEST(Cfx, JsonShape) {
    const auto& t = gridcf::testing::trained_case30();
    const ClassifierModel m(t.tree);
    const LoadProfile& x = infeasibles().dt.front();
    const auto set = generate_counterfactuals(m, x, CfConstraints::defaults(t.network, x), quick(4));
    const auto j = counterfactuals_to_json(t.network, set);
    ASSERT_TRUE(j.contains("options"));
    EXPECT_EQ(j["options"].size(), set.options.size());
    for (const auto& key : {"yloss", "dist", "dpp", "total"}) EXPECT_TRUE(j["objective"].contains(key));
    EXPECT_EQ(j["seed"].get<std::uint64_t>(), 4u);
    for (std::size_t i = 0; i < set.options.size(); ++i) {
        const auto& delta = j["options"][i]["delta"];
        EXPECT_EQ(delta.size(), set.options[i].changed);
        for (const auto& [bus, v] : delta.items()) {
            const std::size_t idx = t.network.bus_index(std::stoi(bus));
            EXPECT_DOUBLE_EQ(v.get<double>(), set.options[i].delta[idx]);
        }
    }
}
