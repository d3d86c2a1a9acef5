#include "gridcf/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridcf/errors.hpp"

namespace gridcf {

std::size_t Dataset::count(FeasibilityLabel label) const {
    return static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(), [label](const Sample& s) { return s.label == label; }));
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

LoadProfile sample_profile(const NetworkCase& c, std::mt19937_64& rng, double perturbation) {
    LoadProfile p;
    p.demand.reserve(c.bus_count());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& bus : c.buses) {
        const double nominal = bus.nominal_load;
        // Draw even for zero-load buses so the stream position is bus-aligned.
        const double u = unit(rng);
        if (nominal == 0.0) {
            p.demand.push_back(0.0);
            continue;
        }
        const double lo = nominal * (1.0 - perturbation);
        const double hi = nominal * (1.0 + perturbation);
        const double v = lo + (hi - lo) * u;
        p.demand.push_back(std::round(v * 1e6) / 1e6);
    }
    return p;
}

bool admissible(const NetworkCase& c, const LoadProfile& profile) {
    if (profile.size() != c.bus_count()) {
        throw DimensionError("profile length does not match bus count");
    }
    if (!(profile.total() < c.total_generation_capacity())) return false;
    std::vector<double> capacity(c.bus_count(), 0.0);
    for (const auto& br : c.branches) {
        capacity[br.from_bus] += br.flow_limit;
        capacity[br.to_bus] += br.flow_limit;
    }
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (profile[i] > 0.0 && !(profile[i] < capacity[i])) return false;
    }
    return true;
}

Dataset generate_dataset(const NetworkCase& c, std::size_t n, std::uint64_t seed,
                         const GenerateOptions& options) {
    if (n < 2 || n % 2 != 0) {
        throw DimensionError("dataset size must be even and at least 2");
    }
    if (!(options.perturbation >= 0.0 && options.perturbation < 1.0)) {
        throw DimensionError("perturbation must lie in [0, 1)");
    }
    Dataset ds;
    ds.case_id = c.name;
    ds.seed = seed;
    ds.perturbation = options.perturbation;
    ds.samples.reserve(n);

    const std::size_t quota = n / 2;
    std::size_t feasible = 0, infeasible = 0;
    const std::size_t budget = options.draw_budget_factor * n;
    std::size_t draw = 0;
    for (; draw < budget && (feasible < quota || infeasible < quota); ++draw) {
        auto rng = substream(seed, draw);
        LoadProfile p = sample_profile(c, rng, options.perturbation);
        if (!admissible(c, p)) continue;
        const FeasibilityLabel label = check_feasibility(c, p);
        std::size_t& filled = label == FeasibilityLabel::Feasible ? feasible : infeasible;
        if (filled >= quota) continue;
        ++filled;
        ds.samples.push_back({std::move(p), label});
    }
    ds.draws = draw;
    if (feasible < quota || infeasible < quota) {
        throw QuotaTimeout("after " + std::to_string(draw) + " draws: " + std::to_string(feasible) +
                           " feasible, " + std::to_string(infeasible) + " infeasible of " +
                           std::to_string(quota) + " each");
    }
    return ds;
}

DatasetSplit split_dataset(const Dataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DimensionError("split ratio must lie in (0, 1)");
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        by_class[static_cast<int>(ds.samples[i].label)].push_back(i);
    }
    // The overall train size is fixed first so that |train| = round(ratio n);
    // the first class takes its floor share and the second the remainder.
    const auto total_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ds.samples.size())));
    const auto first_cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(by_class[0].size())));
    const std::size_t cuts[2] = {first_cut, std::min(by_class[1].size(), total_train - std::min(total_train, first_cut))};
    std::vector<std::size_t> train_idx, test_idx;
    for (int k = 0; k < 2; ++k) {
        auto& idx = by_class[k];
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t cut = cuts[k];
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
        test_idx.insert(test_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
    }
    if (train_idx.empty() || test_idx.empty()) {
        throw TooSmall("split leaves an empty part (" + std::to_string(train_idx.size()) + "/" +
                       std::to_string(test_idx.size()) + ")");
    }
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    std::shuffle(test_idx.begin(), test_idx.end(), rng);

    DatasetSplit split;
    for (Dataset* part : {&split.train, &split.test}) {
        part->case_id = ds.case_id;
        part->seed = ds.seed;
        part->perturbation = ds.perturbation;
    }
    for (std::size_t i : train_idx) split.train.samples.push_back(ds.samples[i]);
    for (std::size_t i : test_idx) split.test.samples.push_back(ds.samples[i]);
    return split;
}

std::string dataset_csv(const Dataset& ds) {
    std::string out;
    const std::size_t d = ds.features();
    for (std::size_t j = 0; j < d; ++j) {
        out += "d_" + std::to_string(j) + ",";
    }
    out += "label\n";
    char buf[64];
    for (const auto& s : ds.samples) {
        for (double v : s.profile.demand) {
            std::snprintf(buf, sizeof buf, "%.6f,", v);
            out += buf;
        }
        out += std::to_string(static_cast<int>(s.label));
        out += '\n';
    }
    return out;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << dataset_csv(ds);
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

double to_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw SyntaxError("bad CSV number '" + s + "'");
    return v;
}

}  // namespace

Dataset parse_dataset_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SyntaxError("empty dataset CSV");
    const auto header = split_commas(line);
    if (header.empty() || header.back() != "label") {
        throw SyntaxError("dataset CSV header must end with 'label'");
    }
    const std::size_t d = header.size() - 1;
    Dataset ds;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_commas(line);
        if (cells.size() != d + 1) throw SyntaxError("dataset CSV row has wrong column count");
        Sample s;
        s.profile.demand.reserve(d);
        for (std::size_t j = 0; j < d; ++j) s.profile.demand.push_back(to_double(cells[j]));
        const int label = static_cast<int>(to_double(cells[d]));
        if (label != 0 && label != 1) throw SyntaxError("label must be 0 or 1");
        s.label = static_cast<FeasibilityLabel>(label);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset_csv(buf.str());
}

nlohmann::json dataset_manifest(const Dataset& ds) {
    return {{"schema", "gridcf.dataset/1"},
            {"case_id", ds.case_id},
            {"seed", ds.seed},
            {"perturbation", ds.perturbation},
            {"buses", ds.features()},
            {"draws", ds.draws},
            {"counts",
             {{"total", ds.size()},
              {"feasible", ds.count(FeasibilityLabel::Feasible)},
              {"infeasible", ds.count(FeasibilityLabel::Infeasible)}}}};
}

void write_dataset_manifest(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << dataset_manifest(ds).dump(2) << '\n';
}

void apply_manifest(Dataset& ds, const nlohmann::json& manifest) {
    ds.case_id = manifest.value("case_id", std::string{});
    ds.seed = manifest.value("seed", std::uint64_t{0});
    ds.perturbation = manifest.value("perturbation", 0.65);
    ds.draws = manifest.value("draws", std::size_t{0});
}

std::vector<LoadProfile> read_profiles_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::vector<LoadProfile> out;
    std::string line;
    bool has_label = false;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_commas(line);
        if (first) {
            first = false;
            if (!cells.empty() && cells.front().rfind("d_", 0) == 0) {
                has_label = cells.back() == "label";
                continue;
            }
        }
        if (has_label && !cells.empty()) cells.pop_back();
        LoadProfile p;
        for (const auto& cell : cells) p.demand.push_back(to_double(cell));
        out.push_back(std::move(p));
    }
    if (out.empty()) throw SyntaxError("no profiles in " + path);
    return out;
}

}  // namespace gridcf
