#pragma once

#include <random>
#include <string>

#include "gridcf/caseio.hpp"
#include "gridcf/datagen.hpp"
#include "gridcf/learn.hpp"
#include "gridcf/lpcore.hpp"

namespace gridcf::testing {

std::string fixture(const std::string& name);
std::string data_file(const std::string& name);
std::string read_text(const std::string& path);

// Status and optimum found by enumerating every basic solution. Infinite
// bounds are replaced by a box of half-width `box`; growing the box and
// seeing the optimum move identifies unbounded problems.
struct BruteOutcome {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
};

BruteOutcome brute_force_lp(const LinearProgram& lp, double box = 1e4);

// At most 5 variables and 8 rows, small integer data, mixed bounds.
LinearProgram random_small_lp(std::mt19937_64& rng);

// Small case used by tests that need a network and trained models without
// paying for the full 10k experiment.
struct Trained {
    NetworkCase network;
    DatasetSplit split;
    FfnnModel ffnn;
    TreeModel tree;
};

const Trained& trained_case30();

}  // namespace gridcf::testing
