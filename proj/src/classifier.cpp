#include <fstream>
#include <sstream>

#include "gridcf/errors.hpp"
#include "gridcf/learn.hpp"

namespace gridcf {

double predict_proba(const ClassifierModel& m, std::span<const double> raw) {
    return std::visit([&](const auto& model) { return predict_proba(model, raw); }, m);
}

double logit(const ClassifierModel& m, std::span<const double> raw) {
    return std::visit([&](const auto& model) { return logit(model, raw); }, m);
}

const FeatureScaler& scaler_of(const ClassifierModel& m) {
    return std::visit([](const auto& model) -> const FeatureScaler& { return model.scaler; }, m);
}

const std::vector<double>& mads_of(const ClassifierModel& m) {
    return std::visit([](const auto& model) -> const std::vector<double>& { return model.mads; }, m);
}

std::string kind_of(const ClassifierModel& m) {
    return std::holds_alternative<FfnnModel>(m) ? "ffnn" : "tree";
}

std::size_t Metrics::total() const {
    return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
}

Metrics evaluate(const std::function<double(const LoadProfile&)>& proba, const Dataset& test) {
    Metrics m;
    for (const auto& s : test.samples) {
        const int truth = static_cast<int>(s.label);
        const int predicted = proba(s.profile) > 0.5 ? 1 : 0;
        ++m.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
    }
    const std::size_t total = m.total();
    if (total > 0) {
        m.accuracy = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / static_cast<double>(total);
    }
    const std::size_t infeasible = m.confusion[0][0] + m.confusion[0][1];
    if (infeasible > 0) {
        m.false_feasible_rate = static_cast<double>(m.confusion[0][1]) / static_cast<double>(infeasible);
    }
    return m;
}

Metrics evaluate(const ClassifierModel& model, const Dataset& test) {
    return evaluate([&](const LoadProfile& p) { return predict_proba(model, p.demand); }, test);
}

nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"confusion", {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}},
            {"false_feasible_rate", m.false_feasible_rate},
            {"total", m.total()}};
}

Metrics metrics_from_json(const nlohmann::json& j) {
    Metrics m;
    m.accuracy = j.at("accuracy").get<double>();
    m.false_feasible_rate = j.at("false_feasible_rate").get<double>();
    const auto& c = j.at("confusion");
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) m.confusion[a][b] = c.at(a).at(b).get<std::size_t>();
    }
    return m;
}

namespace {

constexpr const char* kModelSchema = "gridcf.model/1";

nlohmann::json scaler_json(const FeatureScaler& s) { return {{"min", s.min}, {"max", s.max}}; }

FeatureScaler scaler_from(const nlohmann::json& j) {
    FeatureScaler s;
    s.min = j.at("min").get<std::vector<double>>();
    s.max = j.at("max").get<std::vector<double>>();
    if (s.min.size() != s.max.size()) throw SyntaxError("scaler min/max length mismatch");
    return s;
}

}  // namespace

nlohmann::json model_to_json(const ClassifierModel& m, const std::optional<Metrics>& metrics) {
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["kind"] = kind_of(m);
    j["scaler"] = scaler_json(scaler_of(m));
    j["mads"] = mads_of(m);
    if (const auto* f = std::get_if<FfnnModel>(&m)) {
        auto& layers = j["layers"] = nlohmann::json::array();
        for (const auto& l : f->layers) {
            layers.push_back({{"inputs", l.inputs}, {"outputs", l.outputs},
                              {"weights", l.weights}, {"bias", l.bias}});
        }
    } else {
        const auto& t = std::get<TreeModel>(m);
        j["max_depth"] = t.max_depth;
        auto& nodes = j["nodes"] = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                             {"right", n.right}, {"depth", n.depth},
                             {"count_feasible", n.count_feasible},
                             {"count_infeasible", n.count_infeasible}, {"proba", n.proba}});
        }
    }
    if (metrics) j["metrics"] = metrics_to_json(*metrics);
    return j;
}

StoredModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema", std::string{}) != kModelSchema) {
            throw SyntaxError("not a gridcf model (schema mismatch)");
        }
        const std::string kind = j.at("kind").get<std::string>();
        StoredModel out;
        if (kind == "ffnn") {
            FfnnModel f;
            f.scaler = scaler_from(j.at("scaler"));
            f.mads = j.at("mads").get<std::vector<double>>();
            for (const auto& l : j.at("layers")) {
                DenseLayer layer;
                layer.inputs = l.at("inputs").get<std::size_t>();
                layer.outputs = l.at("outputs").get<std::size_t>();
                layer.weights = l.at("weights").get<std::vector<double>>();
                layer.bias = l.at("bias").get<std::vector<double>>();
                if (layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs) {
                    throw SyntaxError("layer shape mismatch");
                }
                f.layers.push_back(std::move(layer));
            }
            if (f.layers.empty() || f.layers.front().inputs != f.scaler.dim() || f.layers.back().outputs != 2) {
                throw SyntaxError("network shape does not match scaler");
            }
            out.model = std::move(f);
        } else if (kind == "tree") {
            TreeModel t;
            t.scaler = scaler_from(j.at("scaler"));
            t.mads = j.at("mads").get<std::vector<double>>();
            t.max_depth = j.at("max_depth").get<int>();
            for (const auto& n : j.at("nodes")) {
                TreeNode node;
                node.feature = n.at("feature").get<int>();
                node.threshold = n.at("threshold").get<double>();
                node.left = n.at("left").get<int>();
                node.right = n.at("right").get<int>();
                node.depth = n.at("depth").get<int>();
                node.count_feasible = n.at("count_feasible").get<std::size_t>();
                node.count_infeasible = n.at("count_infeasible").get<std::size_t>();
                node.proba = n.at("proba").get<double>();
                t.nodes.push_back(node);
            }
            const auto count = static_cast<int>(t.nodes.size());
            if (count == 0) throw SyntaxError("tree has no nodes");
            for (const auto& n : t.nodes) {
                if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count ||
                                     n.feature >= static_cast<int>(t.scaler.dim()))) {
                    throw SyntaxError("tree node references out of range");
                }
            }
            out.model = std::move(t);
        } else {
            throw SyntaxError("unknown model kind '" + kind + "'");
        }
        if (j.contains("metrics")) out.metrics = metrics_from_json(j.at("metrics"));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw SyntaxError(std::string("model json: ") + e.what());
    }
}

void save_model(const std::string& path, const ClassifierModel& m, const std::optional<Metrics>& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << model_to_json(m, metrics).dump() << '\n';
}

StoredModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SyntaxError(path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace gridcf
