#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcf/caseio.hpp"
#include "gridcf/dcopf.hpp"

namespace gridcf {

struct Sample {
    LoadProfile profile;
    FeasibilityLabel label = FeasibilityLabel::Infeasible;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::vector<Sample> samples;
    std::string case_id;
    std::uint64_t seed = 0;
    double perturbation = 0.65;
    std::size_t draws = 0;  // total draws consumed by rejection sampling

    std::size_t size() const { return samples.size(); }
    std::size_t count(FeasibilityLabel label) const;
    std::size_t features() const { return samples.empty() ? 0 : samples.front().profile.size(); }
};

struct DatasetSplit {
    Dataset train;
    Dataset test;
};

struct GenerateOptions {
    double perturbation = 0.65;
    // Rejection sampling gives up after draw_budget_factor * n draws.
    std::size_t draw_budget_factor = 100;
};

// Uniform in [p_nom (1 - perturbation), p_nom (1 + perturbation)] per bus,
// rounded to 1e-6 MW so that persisted CSV values are exact.
LoadProfile sample_profile(const NetworkCase& c, std::mt19937_64& rng, double perturbation = 0.65);

// Total demand below total generation capacity, and each loaded bus below the
// summed limits of its incident branches.
bool admissible(const NetworkCase& c, const LoadProfile& profile);

// Balanced dataset of n admissible samples (n/2 per class), labelled by
// check_feasibility. Draw k uses an RNG stream derived from (seed, k).
Dataset generate_dataset(const NetworkCase& c, std::size_t n, std::uint64_t seed,
                         const GenerateOptions& options = {});

// Stratified shuffle split; `ratio` is the train fraction.
DatasetSplit split_dataset(const Dataset& ds, double ratio, std::uint64_t seed);

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

// CSV: header d_0..d_{N-1},label; one row per sample, 6 decimals.
void write_dataset_csv(const Dataset& ds, const std::string& path);
std::string dataset_csv(const Dataset& ds);
Dataset read_dataset_csv(const std::string& path);
Dataset parse_dataset_csv(const std::string& text);

nlohmann::json dataset_manifest(const Dataset& ds);
void write_dataset_manifest(const Dataset& ds, const std::string& path);
// Copies case_id / seed / perturbation / draws from a manifest.
void apply_manifest(Dataset& ds, const nlohmann::json& manifest);

// Reads profiles from a CSV in dataset format (label column optional) or a
// bare comma-separated row of numbers.
std::vector<LoadProfile> read_profiles_csv(const std::string& path);

}  // namespace gridcf
