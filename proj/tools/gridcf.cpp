#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridcf/caseio.hpp"
#include "gridcf/cfx.hpp"
#include "gridcf/datagen.hpp"
#include "gridcf/dcopf.hpp"
#include "gridcf/errors.hpp"
#include "gridcf/gateway.hpp"
#include "gridcf/learn.hpp"
#include "gridcf/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridcf;

namespace {

Gateway* g_gateway = nullptr;

void on_signal(int) {
    if (g_gateway) g_gateway->stop();
}

// --seed, else GRIDCF_SEED, else a fresh random seed reported on stderr.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("GRIDCF_SEED"); env && *env) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw Error(std::string("GRIDCF_SEED is not an unsigned integer: ") + env);
        }
    }
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << s << "\n";
    return s;
}

void emit(const json& j, const std::string& out) {
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Error("cannot write " + out);
    f << j.dump(2) << "\n";
}

std::vector<int> parse_bus_list(const std::string& s) {
    std::vector<int> ids;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            ids.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Error("bad bus id '" + tok + "' in --freeze");
        }
    }
    return ids;
}

json restoration_json(const RestorationResult& r) {
    return {{"served", r.served_demand},
            {"delta", r.delta},
            {"total", r.total_adjustment},
            {"dispatch",
             {{"generation", r.dispatch.generation},
              {"angles", r.dispatch.angles},
              {"flows", r.dispatch.flows},
              {"cost", r.dispatch.cost}}}};
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const InputAlreadyFeasible*>(&e)) return 4;
    if (dynamic_cast<const RecoveryFailed*>(&e)) return 5;
    if (dynamic_cast<const SyntaxError*>(&e) || dynamic_cast<const SemanticError*>(&e) ||
        dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const IndexError*>(&e)) {
        return 3;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridcf: DC-OPF infeasibility detection and counterfactual load restoration"};
    app.require_subcommand(1);

    std::string case_path, out, dir, model_path, profile_path, config_path, models_dir, static_dir, log_path;
    std::string model_kind = "ffnn", freeze_list, host = "0.0.0.0";
    double scale = 1.0, perturb = 0.65, lr = 1e-3, ratio = 0.8, lambda1 = 0.5, lambda2 = 1.0;
    std::size_t n = 10000, epochs = 300, k = 3, max_retries = 3, generations = 200, population = 30;
    int depth = 4, port = 8080;
    std::optional<std::uint64_t> seed;
    bool allow_negative = false;

    auto* parse = app.add_subcommand("parse", "Parse a MATPOWER case and print its canonical JSON");
    parse->add_option("case", case_path, "case.m")->required()->check(CLI::ExistingFile);
    parse->add_option("--scale", scale, "line limit scale");
    parse->add_option("--out", out, "case.json");

    auto* dataset = app.add_subcommand("dataset", "Generate a balanced, labelled dataset");
    dataset->add_option("case", case_path, "case.m")->required()->check(CLI::ExistingFile);
    dataset->add_option("--n", n, "sample count (even)");
    dataset->add_option("--seed", seed, "seed");
    dataset->add_option("--perturb", perturb, "relative perturbation per bus");
    dataset->add_option("--scale", scale, "line limit scale");
    dataset->add_option("--ratio", ratio, "train fraction");
    dataset->add_option("--out", dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "Train a classifier on DIR/train.csv");
    train->add_option("dir", dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--model", model_kind, "ffnn|tree")->check(CLI::IsMember({"ffnn", "tree", "dt"}));
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--depth", depth, "tree depth");
    train->add_option("--seed", seed, "seed");
    train->add_option("--out", out, "model.json")->required();

    auto* classify = app.add_subcommand("classify", "Classify load profiles");
    classify->add_option("model", model_path, "model.json")->required()->check(CLI::ExistingFile);
    classify->add_option("profile", profile_path, "profile.csv")->required()->check(CLI::ExistingFile);

    auto* restore = app.add_subcommand("restore", "Generate validated counterfactual load adjustments");
    restore->add_option("case", case_path, "case.m")->required()->check(CLI::ExistingFile);
    restore->add_option("model", model_path, "model.json")->required()->check(CLI::ExistingFile);
    restore->add_option("profile", profile_path, "profile.csv")->required()->check(CLI::ExistingFile);
    restore->add_option("--k", k, "options to return");
    restore->add_option("--lambda1", lambda1, "proximity weight");
    restore->add_option("--lambda2", lambda2, "diversity weight");
    restore->add_option("--seed", seed, "seed");
    restore->add_flag("--allow-negative", allow_negative, "allow net injection at load buses");
    restore->add_option("--freeze", freeze_list, "comma-separated bus ids to keep unchanged");
    restore->add_option("--scale", scale, "line limit scale");
    restore->add_option("--max-retries", max_retries, "retries after validation failures");
    restore->add_option("--generations", generations, "search generations");
    restore->add_option("--population", population, "search population");
    restore->add_option("--out", out, "options.json");

    auto* baseline = app.add_subcommand("baseline", "Minimum L1 load adjustment restoring feasibility");
    baseline->add_option("case", case_path, "case.m")->required()->check(CLI::ExistingFile);
    baseline->add_option("profile", profile_path, "profile.csv")->required()->check(CLI::ExistingFile);
    baseline->add_option("--scale", scale, "line limit scale");
    baseline->add_option("--out", out, "restoration.json");

    auto* experiment = app.add_subcommand("experiment", "Run the full experiment from a config file");
    experiment->add_option("config", config_path, "config.json")->required()->check(CLI::ExistingFile);
    experiment->add_option("--out", dir, "output directory")->required();

    auto* serve = app.add_subcommand("serve", "Start the HTTP gateway");
    serve->add_option("--case", case_path, "case.m")->required()->check(CLI::ExistingFile);
    serve->add_option("--models", models_dir, "directory of model json files")->required();
    serve->add_option("--port", port, "port");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--scale", scale, "line limit scale");
    serve->add_option("--static", static_dir, "console bundle directory");
    serve->add_option("--log", log_path, "request log (JSONL)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*parse) {
            emit(case_to_json(load_case_file(case_path, scale)), out);
        } else if (*dataset) {
            const NetworkCase c = load_case_file(case_path, scale);
            const std::uint64_t s = resolve_seed(seed);
            GenerateOptions opts;
            opts.perturbation = perturb;
            Dataset ds = generate_dataset(c, n, s, opts);
            ds.case_id = c.name;
            const DatasetSplit split = split_dataset(ds, ratio, s);
            fs::create_directories(dir);
            const fs::path d(dir);
            write_dataset_csv(ds, (d / "dataset.csv").string());
            write_dataset_manifest(ds, (d / "dataset.manifest.json").string());
            write_dataset_csv(split.train, (d / "train.csv").string());
            write_dataset_csv(split.test, (d / "test.csv").string());
            std::cout << "wrote " << ds.size() << " samples (" << ds.count(FeasibilityLabel::Feasible)
                      << " feasible) from " << ds.draws << " draws; split " << split.train.size() << "/"
                      << split.test.size() << "\n";
        } else if (*train) {
            const fs::path d(dir);
            const Dataset tr = read_dataset_csv((d / "train.csv").string());
            const std::optional<Dataset> te = fs::exists(d / "test.csv")
                                                  ? std::optional<Dataset>(read_dataset_csv((d / "test.csv").string()))
                                                  : std::nullopt;
            ClassifierModel model;
            if (model_kind == "ffnn") {
                FfnnConfig cfg;
                cfg.epochs = epochs;
                cfg.learning_rate = lr;
                cfg.seed = resolve_seed(seed);
                model = train_ffnn(tr, cfg);
            } else {
                TreeConfig cfg;
                cfg.max_depth = depth;
                model = train_tree(tr, cfg);
            }
            std::optional<Metrics> metrics;
            if (te) {
                metrics = evaluate(model, *te);
                std::cout << "test accuracy " << metrics->accuracy << " on " << metrics->total() << " samples\n";
            }
            save_model(out, model, metrics);
        } else if (*classify) {
            const StoredModel m = load_model(model_path);
            json arr = json::array();
            for (const auto& p : read_profiles_csv(profile_path)) {
                const double pr = predict_proba(m.model, p.demand);
                arr.push_back({{"label", to_string(pr > 0.5 ? FeasibilityLabel::Feasible : FeasibilityLabel::Infeasible)},
                               {"proba", pr},
                               {"logit", logit(m.model, p.demand)}});
            }
            std::cout << (arr.size() == 1 ? arr[0] : arr).dump(2) << "\n";
        } else if (*restore) {
            const NetworkCase c = load_case_file(case_path, scale);
            const StoredModel m = load_model(model_path);
            CfConfig cfg;
            cfg.k = k;
            cfg.lambda1 = lambda1;
            cfg.lambda2 = lambda2;
            cfg.generations = generations;
            cfg.population = population;
            cfg.seed = resolve_seed(seed);
            const std::vector<int> frozen = parse_bus_list(freeze_list);
            json arr = json::array();
            for (const auto& x : read_profiles_csv(profile_path)) {
                CfConstraints cons = CfConstraints::defaults(c, x, allow_negative);
                for (int id : frozen) cons.freeze(c.bus_index(id), x);
                const ValidatedOptions v = restore_with_validation(c, m.model, x, cons, cfg, max_retries);
                json j = counterfactuals_to_json(c, v.options);
                j["retries"] = v.retries_used;
                j["baseline"] = {{"total", v.baseline.total_adjustment}};
                arr.push_back(j);
            }
            emit(arr.size() == 1 ? arr[0] : arr, out);
        } else if (*baseline) {
            const NetworkCase c = load_case_file(case_path, scale);
            json arr = json::array();
            for (const auto& x : read_profiles_csv(profile_path)) arr.push_back(restoration_json(restore_baseline(c, x)));
            emit(arr.size() == 1 ? arr[0] : arr, out);
        } else if (*experiment) {
            const ExperimentConfig cfg = ExperimentConfig::load(config_path);
            const ExperimentArtifacts a = run_experiment(cfg);
            write_experiment(a, dir);
            std::cout << report_markdown(a.report);
        } else if (*serve) {
            GatewayOptions opts;
            opts.static_dir = static_dir;
            opts.log_path = log_path;
            Gateway gw(load_case_file(case_path, scale), Gateway::load_models(models_dir), opts);
            g_gateway = &gw;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving " << gw.network().name << " on " << host << ":" << port << "\n";
            if (!gw.serve(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
            g_gateway = nullptr;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    }
    return 0;
}
