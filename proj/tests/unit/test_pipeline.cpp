#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gridcf/errors.hpp"
#include "gridcf/pipeline.hpp"
#include "support.hpp"

using namespace gridcf;
using gridcf::testing::data_file;

namespace {

const LoadProfile& first_ffnn_infeasible() {
    static const LoadProfile x = [] {
        const auto& t = gridcf::testing::trained_case30();
        for (const Sample& s : t.split.test.samples) {
            if (s.label == FeasibilityLabel::Infeasible && predict_proba(ClassifierModel(t.ffnn), s.profile.demand) <= 0.5) {
                return s.profile;
            }
        }
        throw std::runtime_error("no infeasible test profile");
    }();
    return x;
}

ExperimentConfig small_config() {
    ExperimentConfig c = ExperimentConfig::from_json(
        {{"case", "pglib_opf_case30_ieee.m"},
         {"dataset", {{"n", 400}, {"seed", 3}}},
         {"ffnn", {{"epochs", 20}, {"seed", 3}}},
         {"cf", {{"generations", 60}, {"seed", 5}}},
         {"restore", {{"instances", 6}, {"timing_repeats", 1}}}},
        GRIDCF_DATA_DIR);
    return c;
}

}  // namespace

TEST(Pipeline, RetrySeeds) {
    EXPECT_EQ(retry_seed(42, 0), 42u);
    EXPECT_NE(retry_seed(42, 1), 42u);
    EXPECT_NE(retry_seed(42, 1), retry_seed(42, 2));
    EXPECT_EQ(retry_seed(42, 3), retry_seed(42, 3));
}

TEST(Pipeline, RecoversInfeasibleInstance) {
    const auto& t = gridcf::testing::trained_case30();
    const LoadProfile& x = first_ffnn_infeasible();
    CfConfig cfg;
    cfg.seed = 1;
    const ValidatedOptions v =
        restore_with_validation(t.network, ClassifierModel(t.ffnn), x, CfConstraints::defaults(t.network, x), cfg);
    ASSERT_FALSE(v.options.options.empty());
    EXPECT_LE(v.options.options.size(), cfg.k);
    EXPECT_GT(v.baseline.total_adjustment, 0.0);
    for (const CfOption& o : v.options.options) {
        EXPECT_TRUE(o.validated);
        EXPECT_EQ(check_feasibility(t.network, o.profile), FeasibilityLabel::Feasible);
        EXPECT_LE(v.baseline.total_adjustment, o.total_adjustment() + 1e-4);
    }
}

TEST(Pipeline, ExactlyFeasibleInputRejected) {
    const auto& t = gridcf::testing::trained_case30();
    const LoadProfile x(t.network.nominal_loads());
    EXPECT_THROW(restore_with_validation(t.network, ClassifierModel(t.tree), x, CfConstraints::defaults(t.network, x), {}),
                 InputAlreadyFeasible);
}

TEST(Pipeline, AllFrozenExhaustsRetries) {
    const auto& t = gridcf::testing::trained_case30();
    const LoadProfile& x = first_ffnn_infeasible();
    CfConstraints c = CfConstraints::defaults(t.network, x);
    for (std::size_t i = 0; i < x.size(); ++i) c.freeze(i, x);
    CfConfig cfg;
    cfg.generations = 10;
    try {
        restore_with_validation(t.network, ClassifierModel(t.ffnn), x, c, cfg, 3);
        FAIL() << "expected RecoveryFailed";
    } catch (const RecoveryFailed& e) {
        EXPECT_EQ(e.retries_used(), 3u);
    }
}

TEST(Pipeline, AdjustmentStatsExamples) {
    const AdjustmentStats s = adjustment_stats({{0.0, 10.0}});
    EXPECT_EQ(s.count, 1u);
    EXPECT_DOUBLE_EQ(s.mean, 10.0);
    EXPECT_DOUBLE_EQ(s.std, 0.0);
    EXPECT_EQ(s.deltas, std::vector<double>{10.0});
    const AdjustmentStats two = adjustment_stats({{-2.0, 0.0}, {4.0, 2.0}});
    EXPECT_DOUBLE_EQ(two.mean, 4.0);
    EXPECT_DOUBLE_EQ(two.std, 2.0);
    EXPECT_EQ(two.deltas, (std::vector<double>{-2.0, 4.0, 2.0}));
    EXPECT_THROW(adjustment_stats({}), EmptyInput);
    EXPECT_THROW(perturbation_stats({}), EmptyInput);
}

TEST(Pipeline, HistogramExample) {
    const auto h = histogram({0.0, 0.0, 10.0}, 5.0);
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h.at(0), 2u);
    EXPECT_EQ(h.at(2), 1u);
    const auto neg = histogram({-0.5, 0.5}, 1.0);
    EXPECT_EQ(neg.at(-1), 1u);
    EXPECT_EQ(neg.at(0), 1u);
}

TEST(Pipeline, SummaryByHand) {
    const Summary s = summarize({1.0, 2.0, 3.0, 10.0});
    EXPECT_DOUBLE_EQ(s.mean, 4.0);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_NEAR(s.std, std::sqrt((9.0 + 4.0 + 1.0 + 36.0) / 4.0), 1e-12);
    EXPECT_EQ(s.count, 4u);
}

TEST(Pipeline, ConfigResolvesRelativeCase) {
    const auto dir = std::filesystem::temp_directory_path() / "gridcf_cfg_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "c.json") << R"({"case": "../x/case.m", "dataset": {"n": 10}})";
    const ExperimentConfig c = ExperimentConfig::load((dir / "c.json").string());
    EXPECT_EQ(c.case_path, (dir.parent_path() / "x" / "case.m").lexically_normal().string());
    EXPECT_EQ(c.samples, 10u);
    std::ofstream(dir / "bad.json") << R"({"dataset": {"n": 10}})";
    EXPECT_THROW(ExperimentConfig::load((dir / "bad.json").string()), SyntaxError);
    std::ofstream(dir / "odd.json") << R"({"case": "a.m", "dataset": {"n": 11}})";
    EXPECT_THROW(ExperimentConfig::load((dir / "odd.json").string()), Error);
    std::filesystem::remove_all(dir);
}

TEST(Pipeline, MissingCaseIsStageError) {
    ExperimentConfig c = small_config();
    c.case_path = "/nonexistent/case.m";
    try {
        run_experiment(c);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "case");
    }
}

TEST(Pipeline, SmallExperimentInvariantsAndDeterminism) {
    const ExperimentConfig cfg = small_config();
    const ExperimentArtifacts a = run_experiment(cfg);
    const ExperimentReport& r = a.report;
    EXPECT_EQ(r.train_size + r.test_size, 400u);
    EXPECT_EQ(r.instances.size(), 6u);
    for (const auto& m : kMethods) {
        EXPECT_GE(r.recovery_rate(m), 0.0);
        EXPECT_LE(r.recovery_rate(m), 1.0);
    }
    for (const InstanceRecord& inst : r.instances) {
        EXPECT_EQ(a.split.test.samples[inst.test_index].label, FeasibilityLabel::Infeasible);
        for (const auto& [name, m] : inst.methods) {
            if (m.outcome != Outcome::Recovered) continue;
            for (std::size_t o = 0; o < m.option_profiles.size(); ++o) {
                EXPECT_EQ(check_feasibility(a.network, m.option_profiles[o]), FeasibilityLabel::Feasible);
                EXPECT_LE(inst.baseline_total, m.option_totals[o] + 1e-4);
            }
        }
    }
    const nlohmann::json j = report_to_json(r, a.network);
    for (const auto& m : {"ffnn", "dt", "baseline"}) {
        std::size_t binned = 0;
        for (const auto& bin : j["histogram"][m]) binned += bin["count"].get<std::size_t>();
        EXPECT_EQ(binned, r.pooled_deltas(m).size()) << m;
    }
    EXPECT_EQ(r.timings("baseline").size(), r.instances.size());

    const ExperimentArtifacts b = run_experiment(cfg);
    EXPECT_EQ(report_to_json(b.report, b.network).dump(2), j.dump(2));

    const auto out = std::filesystem::temp_directory_path() / "gridcf_experiment_test";
    std::filesystem::remove_all(out);
    write_experiment(a, out.string());
    for (const char* f : {"report.json", "report.md", "histogram.csv", "timing.json", "models/ffnn.json", "models/dt.json"}) {
        EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
    }
    std::filesystem::remove_all(out);
}

TEST(Pipeline, ReportRejectsForgedRecovery) {
    ExperimentArtifacts a = run_experiment(small_config());
    for (InstanceRecord& inst : a.report.instances) {
        auto& m = inst.methods["dt"];
        if (m.outcome == Outcome::Recovered) {
            m.option_profiles[0] = inst.input;
            EXPECT_THROW(report_to_json(a.report, a.network), StageError);
            return;
        }
    }
    GTEST_SKIP() << "no recovered instance to forge";
}
