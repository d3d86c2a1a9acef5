#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gridcf/errors.hpp"
#include "gridcf/pipeline.hpp"

namespace gridcf {

namespace {

const std::vector<std::string> kAllMethods{"ffnn", "dt", "baseline"};

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string label_of(const std::string& method) {
    if (method == "ffnn") return "CF-FFNN";
    if (method == "dt") return "CF-DT";
    return "Baseline";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

nlohmann::json summary_json(const Summary& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"median", s.median}};
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& r, const NetworkCase& c) {
    for (const auto& inst : r.instances) {
        for (const auto& [name, m] : inst.methods) {
            if (m.outcome != Outcome::Recovered) continue;
            for (const auto& p : m.option_profiles) {
                if (check_feasibility(c, p) != FeasibilityLabel::Feasible) {
                    throw StageError("report", "instance " + std::to_string(inst.test_index) + " (" + name +
                                                   ") reported recovered but does not re-validate");
                }
            }
        }
    }

    nlohmann::json j;
    j["schema"] = "gridcf.report/1";
    j["config"] = r.config.to_json();
    j["case"] = {{"name", r.case_name}, {"buses", r.bus_ids.size()}};
    j["dataset"] = {{"size", r.train_size + r.test_size},
                    {"draws", r.dataset_draws},
                    {"train", r.train_size},
                    {"test", r.test_size}};
    for (const auto& [name, m] : r.metrics) j["classifiers"][name] = metrics_to_json(m);

    for (const auto& method : kAllMethods) {
        const Summary s = summarize(r.adjustment_totals(method));
        j["adjustment"][method] = {{"count", s.count}, {"mean", s.mean}, {"std", s.std}};
    }
    for (const auto& method : kMethods) {
        std::size_t skipped = 0, failed = 0;
        for (const auto& inst : r.instances) {
            const Outcome o = inst.methods.at(method).outcome;
            if (o == Outcome::ClassifiedFeasible) ++skipped;
            if (o == Outcome::Failed) ++failed;
        }
        j["recovery"][method] = {{"attempted", r.attempted(method)},
                                 {"recovered", r.recovered(method)},
                                 {"failed", failed},
                                 {"classified_feasible", skipped},
                                 {"rate", r.recovery_rate(method)}};
    }

    j["histogram"]["bin_mw"] = r.config.histogram_bin;
    for (const auto& method : kAllMethods) {
        nlohmann::json bins = nlohmann::json::array();
        for (const auto& [b, n] : histogram(r.pooled_deltas(method), r.config.histogram_bin)) {
            bins.push_back({{"lo", static_cast<double>(b) * r.config.histogram_bin},
                            {"hi", static_cast<double>(b + 1) * r.config.histogram_bin},
                            {"count", n}});
        }
        j["histogram"][method] = bins;
    }

    nlohmann::json instances = nlohmann::json::array();
    for (const auto& inst : r.instances) {
        nlohmann::json ij{{"test_index", inst.test_index}, {"baseline_total", inst.baseline_total}};
        for (const auto& [name, m] : inst.methods) {
            ij[name] = {{"outcome", to_string(m.outcome)}, {"retries", m.retries_used}, {"totals", m.option_totals}};
        }
        instances.push_back(ij);
    }
    j["instances"] = instances;
    return j;
}

nlohmann::json timing_to_json(const ExperimentReport& r) {
    nlohmann::json j;
    j["unit"] = "ms";
    j["repeats"] = r.config.timing_repeats;
    for (const auto& method : kAllMethods) j[method] = summary_json(summarize(r.timings(method)));
    return j;
}

std::string report_markdown(const ExperimentReport& r) {
    std::ostringstream md;
    md << "# Experiment report: " << r.case_name << "\n\n";
    md << "Dataset: " << r.train_size + r.test_size << " samples (" << r.train_size << " train / " << r.test_size
       << " test), " << r.dataset_draws << " draws, seed " << r.config.seed << ".\n\n";

    md << "## Classifier accuracy\n\n";
    md << "| Model | Accuracy | TN | FP | FN | TP | False-feasible rate |\n|---|---|---|---|---|---|---|\n";
    for (const auto& [name, m] : r.metrics) {
        md << "| " << name << " | " << fmt("%.4f", m.accuracy) << " | " << m.confusion[0][0] << " | "
           << m.confusion[0][1] << " | " << m.confusion[1][0] << " | " << m.confusion[1][1] << " | "
           << fmt("%.4f", m.false_feasible_rate) << " |\n";
    }

    md << "\n## Adjustment (total |delta| per corrected profile, MW)\n\n";
    md << "| Method | Profiles | Mean | Std |\n|---|---|---|---|\n";
    for (const auto& method : kAllMethods) {
        const Summary s = summarize(r.adjustment_totals(method));
        md << "| " << label_of(method) << " | " << s.count << " | " << fmt("%.3f", s.mean) << " | "
           << fmt("%.3f", s.std) << " |\n";
    }

    md << "\n## Recovery\n\n| Method | Attempted | Recovered | Rate |\n|---|---|---|---|\n";
    for (const auto& method : kMethods) {
        md << "| " << label_of(method) << " | " << r.attempted(method) << " | " << r.recovered(method) << " | "
           << fmt("%.4f", r.recovery_rate(method)) << " |\n";
    }

    for (const auto& inst : r.instances) {
        const auto& m = inst.methods.at("ffnn");
        if (m.outcome != Outcome::Recovered) continue;
        std::set<std::size_t> cols;
        for (const auto& d : m.option_deltas) {
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (d[i] != 0.0) cols.insert(i);
            }
        }
        md << "\n## Example options (test profile " << inst.test_index << ", CF-FFNN, MW curtailed)\n\n| Option |";
        for (std::size_t i : cols) md << " Bus " << r.bus_ids[i] << " |";
        md << " Total |\n|---|";
        for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
        md << "---|\n";
        for (std::size_t o = 0; o < m.option_deltas.size(); ++o) {
            md << "| " << o + 1 << " |";
            for (std::size_t i : cols) {
                const double v = m.option_deltas[o][i];
                md << " " << (v != 0.0 ? fmt("%.3f", v) : std::string()) << " |";
            }
            md << " " << fmt("%.3f", m.option_totals[o]) << " |\n";
        }
        md << "| Baseline |";
        for (std::size_t i : cols) {
            const double v = inst.baseline_delta[i];
            md << " " << (v != 0.0 ? fmt("%.3f", v) : std::string()) << " |";
        }
        md << " " << fmt("%.3f", inst.baseline_total) << " |\n";
        break;
    }

    md << "\n## Timing (ms per instance, median of " << r.config.timing_repeats << " runs)\n\n";
    md << "| Method | Mean | Std | Median |\n|---|---|---|---|\n";
    for (const auto& method : kAllMethods) {
        const Summary s = summarize(r.timings(method));
        md << "| " << label_of(method) << " | " << fmt("%.3f", s.mean) << " | " << fmt("%.3f", s.std) << " | "
           << fmt("%.3f", s.median) << " |\n";
    }
    return md.str();
}

std::string histogram_csv(const ExperimentReport& r) {
    std::ostringstream csv;
    csv << "method,bin_lo_mw,bin_hi_mw,count\n";
    for (const auto& method : kAllMethods) {
        for (const auto& [b, n] : histogram(r.pooled_deltas(method), r.config.histogram_bin)) {
            csv << method << ',' << fmt("%.6g", static_cast<double>(b) * r.config.histogram_bin) << ','
                << fmt("%.6g", static_cast<double>(b + 1) * r.config.histogram_bin) << ',' << n << '\n';
        }
    }
    return csv.str();
}

void write_experiment(const ExperimentArtifacts& a, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    fs::create_directories(dir / "models");
    const nlohmann::json report = report_to_json(a.report, a.network);
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "timing.json", timing_to_json(a.report).dump(2) + "\n");
    write_text(dir / "report.md", report_markdown(a.report));
    write_text(dir / "histogram.csv", histogram_csv(a.report));
    save_model((dir / "models" / "ffnn.json").string(), a.ffnn, a.report.metrics.at("ffnn"));
    save_model((dir / "models" / "dt.json").string(), a.tree, a.report.metrics.at("dt"));
}

}  // namespace gridcf
