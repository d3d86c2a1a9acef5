#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcf/cfx.hpp"
#include "gridcf/datagen.hpp"
#include "gridcf/dcopf.hpp"
#include "gridcf/learn.hpp"

namespace gridcf {

struct ValidatedOptions {
    LoadProfile input;
    CounterfactualSet options;  // only options that passed check_feasibility
    std::size_t retries_used = 0;
    RestorationResult baseline;
};

// Seed used by retry `attempt` (0 = the configured seed).
std::uint64_t retry_seed(std::uint64_t seed, std::size_t attempt);

// Classify, search, validate each option against the DC-OPF and retry with a
// fresh seed and twice the generations until k options validate or
// max_retries is spent. Throws InputAlreadyFeasible when the exact
// restoration needs no change, RecoveryFailed when nothing validates.
ValidatedOptions restore_with_validation(const NetworkCase& c, const ClassifierModel& model,
                                         const LoadProfile& x, const CfConstraints& constraints,
                                         const CfConfig& config, std::size_t max_retries = 3);

struct AdjustmentStats {
    std::size_t count = 0;      // corrected profiles
    double mean = 0.0;          // of per-profile total |delta|, MW
    double std = 0.0;           // population standard deviation
    std::vector<double> deltas; // pooled nonzero per-bus deltas, signed
};

// Throws EmptyInput for an empty list.
AdjustmentStats adjustment_stats(const std::vector<std::vector<double>>& per_profile_deltas);

struct PerturbationStats {
    AdjustmentStats counterfactual;
    AdjustmentStats baseline;
};

PerturbationStats perturbation_stats(const std::vector<ValidatedOptions>& results);

// Sparse histogram: bin b covers [b * width, (b + 1) * width).
std::map<long long, std::size_t> histogram(const std::vector<double>& values, double bin_width);

struct ExperimentConfig {
    std::string case_path;
    double line_limit_scale = 1.0;
    std::size_t samples = 10000;
    std::uint64_t seed = 7;
    double perturbation = 0.65;
    double train_ratio = 0.8;
    FfnnConfig ffnn;
    TreeConfig tree;
    CfConfig cf;
    std::size_t max_retries = 3;
    std::size_t restore_instances = 250;  // infeasible test profiles to restore
    std::size_t timing_repeats = 3;
    double histogram_bin = 1.0;  // MW
    bool allow_negative = false;

    // Relative case paths resolve against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
    static ExperimentConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

enum class Outcome { Recovered, Failed, ClassifiedFeasible };

std::string to_string(Outcome o);

struct MethodRecord {
    Outcome outcome = Outcome::Failed;
    std::vector<double> option_totals;  // MW per validated option
    std::vector<std::vector<double>> option_deltas;
    std::vector<LoadProfile> option_profiles;
    std::size_t retries_used = 0;
    double generation_ms = 0.0;
};

struct InstanceRecord {
    std::size_t test_index = 0;
    LoadProfile input;
    std::vector<double> baseline_delta;
    double baseline_total = 0.0;
    double baseline_ms = 0.0;
    std::map<std::string, MethodRecord> methods;  // "ffnn", "dt"
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;
    double median = 0.0;
    std::size_t count = 0;
};

Summary summarize(const std::vector<double>& v);

struct ExperimentReport {
    ExperimentConfig config;
    std::string case_name;
    std::vector<int> bus_ids;
    std::size_t dataset_draws = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::map<std::string, Metrics> metrics;
    std::vector<InstanceRecord> instances;

    std::size_t recovered(const std::string& method) const;
    std::size_t attempted(const std::string& method) const;
    double recovery_rate(const std::string& method) const;
    // Per-profile total |delta| of the baseline or of every validated option.
    std::vector<double> adjustment_totals(const std::string& method) const;
    std::vector<double> pooled_deltas(const std::string& method) const;
    std::vector<double> timings(const std::string& method) const;
};

inline const std::vector<std::string> kMethods{"ffnn", "dt"};

struct ExperimentArtifacts {
    ExperimentReport report;
    FfnnModel ffnn;
    TreeModel tree;
    DatasetSplit split;
    NetworkCase network;
};

// generate -> train -> evaluate -> restore -> validate -> compare. Errors
// escape as StageError naming the stage.
ExperimentArtifacts run_experiment(const ExperimentConfig& config);

// Re-validates every recovered option; throws StageError("report") on a
// mismatch. Wall-clock timings stay out of report.json.
nlohmann::json report_to_json(const ExperimentReport& r, const NetworkCase& c);
nlohmann::json timing_to_json(const ExperimentReport& r);
std::string report_markdown(const ExperimentReport& r);
std::string histogram_csv(const ExperimentReport& r);

// Writes report.json, report.md, histogram.csv, timing.json and the trained
// models under out_dir/models.
void write_experiment(const ExperimentArtifacts& a, const std::string& out_dir);

}  // namespace gridcf
