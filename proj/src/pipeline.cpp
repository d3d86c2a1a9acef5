#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gridcf/errors.hpp"
#include "gridcf/pipeline.hpp"

namespace gridcf {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double total_abs(const std::vector<double>& v) {
    double s = 0.0;
    for (double d : v) s += std::abs(d);
    return s;
}

template <class F>
double median_ms(std::size_t repeats, F&& f) {
    std::vector<double> ms;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, repeats); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    return ms[ms.size() / 2];
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

}  // namespace

std::uint64_t retry_seed(std::uint64_t seed, std::size_t attempt) {
    return attempt == 0 ? seed : splitmix(seed ^ splitmix(attempt));
}

ValidatedOptions restore_with_validation(const NetworkCase& c, const ClassifierModel& model,
                                         const LoadProfile& x, const CfConstraints& constraints,
                                         const CfConfig& config, std::size_t max_retries) {
    if (x.size() != c.buses.size()) {
        throw DimensionError("profile has " + std::to_string(x.size()) + " entries, case has " +
                             std::to_string(c.buses.size()) + " buses");
    }
    constraints.check(x);
    ValidatedOptions out;
    out.input = x;
    out.baseline = restore_baseline(c, x, constraints.baseline_bounds(x));
    if (out.baseline.total_adjustment <= 1e-6) {
        throw InputAlreadyFeasible("profile is feasible; no adjustment needed");
    }

    std::vector<CfOption> kept;
    CfConfig attempt_config = config;
    for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
        attempt_config.seed = retry_seed(config.seed, attempt);
        attempt_config.generations = config.generations << attempt;
        if (attempt > 0) attempt_config.tighten_steps = 0;
        CounterfactualSet set = generate_counterfactuals(model, x, constraints, attempt_config);
        for (auto& o : set.options) {
            const bool seen = std::any_of(kept.begin(), kept.end(),
                                          [&](const CfOption& k) { return k.profile == o.profile; });
            if (seen || kept.size() >= config.k) continue;
            o.validated = check_feasibility(c, o.profile) == FeasibilityLabel::Feasible;
            if (o.validated) kept.push_back(std::move(o));
        }
        out.retries_used = attempt;
        if (kept.size() >= config.k) break;
    }
    if (kept.empty()) {
        throw RecoveryFailed("no counterfactual validated after " + std::to_string(max_retries) + " retries",
                             out.retries_used);
    }

    out.options.config = config;
    out.options.exhausted = kept.size() < config.k;
    std::vector<LoadProfile> profiles;
    for (const auto& o : kept) profiles.push_back(o.profile);
    out.options.objective = cf_objective(profiles, x, model, config);
    out.options.options = std::move(kept);
    return out;
}

AdjustmentStats adjustment_stats(const std::vector<std::vector<double>>& per_profile_deltas) {
    if (per_profile_deltas.empty()) throw EmptyInput("no corrected profiles");
    AdjustmentStats s;
    std::vector<double> totals;
    for (const auto& d : per_profile_deltas) {
        totals.push_back(total_abs(d));
        for (double v : d) {
            if (v != 0.0) s.deltas.push_back(v);
        }
    }
    const Summary sum = summarize(totals);
    s.count = sum.count;
    s.mean = sum.mean;
    s.std = sum.std;
    return s;
}

PerturbationStats perturbation_stats(const std::vector<ValidatedOptions>& results) {
    if (results.empty()) throw EmptyInput("no restoration results");
    std::vector<std::vector<double>> cf, base;
    for (const auto& r : results) {
        for (const auto& o : r.options.options) cf.push_back(o.delta);
        base.push_back(r.baseline.delta);
    }
    PerturbationStats out;
    out.counterfactual = adjustment_stats(cf);
    out.baseline = adjustment_stats(base);
    return out;
}

std::map<long long, std::size_t> histogram(const std::vector<double>& values, double bin_width) {
    if (!(bin_width > 0.0)) throw Error("histogram bin width must be positive");
    std::map<long long, std::size_t> bins;
    for (double v : values) ++bins[static_cast<long long>(std::floor(v / bin_width))];
    return bins;
}

Summary summarize(const std::vector<double>& v) {
    Summary s;
    s.count = v.size();
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(v.size()));
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Recovered: return "recovered";
        case Outcome::Failed: return "failed";
        case Outcome::ClassifiedFeasible: return "classified_feasible";
    }
    return "unknown";
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
    try {
        ExperimentConfig c;
        std::filesystem::path p = j.at("case").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        c.case_path = p.lexically_normal().string();
        c.line_limit_scale = j.value("line_limit_scale", c.line_limit_scale);
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            c.samples = d.value("n", c.samples);
            c.seed = d.value("seed", c.seed);
            c.perturbation = d.value("perturbation", c.perturbation);
            c.train_ratio = d.value("train_ratio", c.train_ratio);
        }
        c.ffnn.seed = c.seed;
        c.cf.seed = c.seed;
        if (j.contains("class_weights")) {
            ClassWeights w;
            w.infeasible = j["class_weights"].value("infeasible", w.infeasible);
            w.feasible = j["class_weights"].value("feasible", w.feasible);
            c.ffnn.class_weights = w;
            c.tree.class_weights = w;
        }
        if (j.contains("ffnn")) {
            const auto& f = j["ffnn"];
            c.ffnn.epochs = f.value("epochs", c.ffnn.epochs);
            c.ffnn.learning_rate = f.value("learning_rate", c.ffnn.learning_rate);
            c.ffnn.batch_size = f.value("batch_size", c.ffnn.batch_size);
            c.ffnn.hidden = f.value("hidden", c.ffnn.hidden);
            c.ffnn.seed = f.value("seed", c.ffnn.seed);
        }
        if (j.contains("tree")) {
            c.tree.max_depth = j["tree"].value("max_depth", c.tree.max_depth);
            c.tree.min_samples_split = j["tree"].value("min_samples_split", c.tree.min_samples_split);
        }
        if (j.contains("cf")) {
            c.cf = cf_config_from_json(j["cf"], c.cf);
            c.max_retries = j["cf"].value("max_retries", c.max_retries);
            c.allow_negative = j["cf"].value("allow_negative", c.allow_negative);
        }
        if (j.contains("restore")) {
            c.restore_instances = j["restore"].value("instances", c.restore_instances);
            c.timing_repeats = j["restore"].value("timing_repeats", c.timing_repeats);
        }
        c.histogram_bin = j.value("histogram_bin_mw", c.histogram_bin);
        c.cf.check();
        if (c.samples < 2 || c.samples % 2 != 0) throw Error("dataset n must be even and at least 2");
        if (!(c.train_ratio > 0.0 && c.train_ratio < 1.0)) throw Error("train_ratio must be in (0, 1)");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw SyntaxError(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SyntaxError(path + ": " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path().string());
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json cf = cf_config_to_json(this->cf);
    cf["max_retries"] = max_retries;
    cf["allow_negative"] = allow_negative;
    return {{"case", std::filesystem::path(case_path).filename().string()},
            {"line_limit_scale", line_limit_scale},
            {"dataset", {{"n", samples}, {"seed", seed}, {"perturbation", perturbation}, {"train_ratio", train_ratio}}},
            {"class_weights", {{"infeasible", ffnn.class_weights.infeasible}, {"feasible", ffnn.class_weights.feasible}}},
            {"ffnn",
             {{"epochs", ffnn.epochs},
              {"learning_rate", ffnn.learning_rate},
              {"batch_size", ffnn.batch_size},
              {"hidden", ffnn.hidden},
              {"seed", ffnn.seed}}},
            {"tree", {{"max_depth", tree.max_depth}, {"min_samples_split", tree.min_samples_split}}},
            {"cf", cf},
            {"restore", {{"instances", restore_instances}, {"timing_repeats", timing_repeats}}},
            {"histogram_bin_mw", histogram_bin}};
}

std::size_t ExperimentReport::recovered(const std::string& method) const {
    std::size_t n = 0;
    for (const auto& i : instances) {
        auto it = i.methods.find(method);
        if (it != i.methods.end() && it->second.outcome == Outcome::Recovered) ++n;
    }
    return n;
}

std::size_t ExperimentReport::attempted(const std::string& method) const {
    std::size_t n = 0;
    for (const auto& i : instances) {
        auto it = i.methods.find(method);
        if (it != i.methods.end() && it->second.outcome != Outcome::ClassifiedFeasible) ++n;
    }
    return n;
}

double ExperimentReport::recovery_rate(const std::string& method) const {
    const std::size_t a = attempted(method);
    return a == 0 ? 0.0 : static_cast<double>(recovered(method)) / static_cast<double>(a);
}

std::vector<double> ExperimentReport::adjustment_totals(const std::string& method) const {
    std::vector<double> out;
    for (const auto& i : instances) {
        if (method == "baseline") {
            out.push_back(i.baseline_total);
            continue;
        }
        auto it = i.methods.find(method);
        if (it == i.methods.end()) continue;
        out.insert(out.end(), it->second.option_totals.begin(), it->second.option_totals.end());
    }
    return out;
}

std::vector<double> ExperimentReport::pooled_deltas(const std::string& method) const {
    std::vector<double> out;
    auto add = [&](const std::vector<double>& d) {
        for (double v : d) {
            if (v != 0.0) out.push_back(v);
        }
    };
    for (const auto& i : instances) {
        if (method == "baseline") {
            add(i.baseline_delta);
            continue;
        }
        auto it = i.methods.find(method);
        if (it == i.methods.end()) continue;
        for (const auto& d : it->second.option_deltas) add(d);
    }
    return out;
}

std::vector<double> ExperimentReport::timings(const std::string& method) const {
    std::vector<double> out;
    for (const auto& i : instances) {
        if (method == "baseline") {
            out.push_back(i.baseline_ms);
            continue;
        }
        auto it = i.methods.find(method);
        if (it != i.methods.end() && it->second.outcome != Outcome::ClassifiedFeasible) {
            out.push_back(it->second.generation_ms);
        }
    }
    return out;
}

ExperimentArtifacts run_experiment(const ExperimentConfig& config) {
    ExperimentArtifacts a;
    ExperimentReport& r = a.report;
    r.config = config;
    a.network = stage("case", [&] { return load_case_file(config.case_path, config.line_limit_scale); });
    const NetworkCase& net = a.network;
    r.case_name = net.name;
    for (const auto& b : net.buses) r.bus_ids.push_back(b.id);

    const Dataset ds = stage("dataset", [&] {
        GenerateOptions opts;
        opts.perturbation = config.perturbation;
        Dataset d = generate_dataset(net, config.samples, config.seed, opts);
        d.case_id = net.name;
        return d;
    });
    r.dataset_draws = ds.draws;
    a.split = stage("split", [&] { return split_dataset(ds, config.train_ratio, config.seed); });
    r.train_size = a.split.train.size();
    r.test_size = a.split.test.size();

    a.ffnn = stage("train_ffnn", [&] { return train_ffnn(a.split.train, config.ffnn); });
    a.tree = stage("train_dt", [&] { return train_tree(a.split.train, config.tree); });
    const std::map<std::string, ClassifierModel> models{{"ffnn", a.ffnn}, {"dt", a.tree}};
    stage("evaluate", [&] {
        for (const auto& [name, m] : models) r.metrics[name] = evaluate(m, a.split.test);
        return 0;
    });

    stage("restore", [&] {
        for (std::size_t t = 0; t < a.split.test.size() && r.instances.size() < config.restore_instances; ++t) {
            const Sample& s = a.split.test.samples[t];
            if (s.label != FeasibilityLabel::Infeasible) continue;
            InstanceRecord rec;
            rec.test_index = t;
            rec.input = s.profile;
            const CfConstraints cons = CfConstraints::defaults(net, s.profile, config.allow_negative);
            const DemandBounds bounds = cons.baseline_bounds(s.profile);
            RestorationResult base;
            rec.baseline_ms = median_ms(config.timing_repeats, [&] { base = restore_baseline(net, s.profile, bounds); });
            rec.baseline_delta = base.delta;
            rec.baseline_total = base.total_adjustment;

            CfConfig cf = config.cf;
            cf.seed = splitmix(config.cf.seed + t);
            for (const auto& [name, m] : models) {
                MethodRecord mr;
                if (predict_proba(m, s.profile.demand) > 0.5) {
                    mr.outcome = Outcome::ClassifiedFeasible;
                    rec.methods[name] = std::move(mr);
                    continue;
                }
                mr.generation_ms = median_ms(config.timing_repeats, [&] {
                    (void)generate_counterfactuals(m, s.profile, cons, cf);
                });
                try {
                    const ValidatedOptions v = restore_with_validation(net, m, s.profile, cons, cf, config.max_retries);
                    mr.outcome = Outcome::Recovered;
                    mr.retries_used = v.retries_used;
                    for (const auto& o : v.options.options) {
                        mr.option_totals.push_back(o.total_adjustment());
                        mr.option_deltas.push_back(o.delta);
                        mr.option_profiles.push_back(o.profile);
                    }
                } catch (const RecoveryFailed& e) {
                    mr.outcome = Outcome::Failed;
                    mr.retries_used = e.retries_used();
                } catch (const InputAlreadyFeasible&) {
                    mr.outcome = Outcome::Failed;
                }
                rec.methods[name] = std::move(mr);
            }
            r.instances.push_back(std::move(rec));
        }
        return 0;
    });
    return a;
}

}  // namespace gridcf
