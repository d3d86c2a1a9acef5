#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "gridcf/dcopf.hpp"
#include "gridcf/errors.hpp"
#include "gridcf/gateway.hpp"
#include "gridcf/pipeline.hpp"

namespace gridcf {

using nlohmann::json;

namespace {

struct BadRequest : Error {
    using Error::Error;
};
struct NotFound : Error {
    using Error::Error;
};

HttpResponse reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

HttpResponse error_reply(int status, const std::string& type, const std::string& message) {
    return reply(status, {{"error", message}, {"type", type}});
}

LoadProfile demand_of(const json& body, const NetworkCase& c) {
    if (!body.contains("demand") || !body["demand"].is_array()) throw BadRequest("'demand' must be an array");
    const auto& arr = body["demand"];
    if (arr.size() != c.buses.size()) {
        throw BadRequest("demand has " + std::to_string(arr.size()) + " entries, case has " +
                         std::to_string(c.buses.size()) + " buses");
    }
    std::vector<double> d;
    d.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) throw BadRequest("demand entries must be finite numbers");
        d.push_back(v.get<double>());
    }
    return LoadProfile(std::move(d));
}

std::vector<double> number_array(const json& v, std::size_t n, const char* name) {
    if (!v.is_array() || v.size() != n) {
        throw BadRequest(std::string("'") + name + "' must be an array of " + std::to_string(n) + " numbers");
    }
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw BadRequest(std::string("'") + name + "' entries must be numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

json dispatch_json(const DispatchSolution& d) {
    return {{"generation", d.generation}, {"angles", d.angles}, {"flows", d.flows}, {"cost", d.cost}};
}

json case_summary(const NetworkCase& c) {
    json buses = json::array(), gens = json::array(), branches = json::array();
    for (const auto& b : c.buses) {
        buses.push_back({{"id", b.id}, {"type", b.type}, {"pd", b.nominal_load}, {"injection", b.fixed_injection}});
    }
    for (const auto& g : c.generators) {
        gens.push_back({{"bus", c.buses[g.bus].id}, {"pmin", g.p_min}, {"pmax", g.p_max}, {"c1", g.cost_linear}});
    }
    for (const auto& br : c.branches) {
        branches.push_back({{"from", c.buses[br.from_bus].id},
                            {"to", c.buses[br.to_bus].id},
                            {"b", br.susceptance},
                            {"limit", br.flow_limit},
                            {"unlimited", br.unlimited}});
    }
    return {{"name", c.name},
            {"baseMVA", c.base_mva},
            {"slack", c.buses[c.slack_bus].id},
            {"totalLoad", LoadProfile(c.nominal_loads()).total()},
            {"totalCapacity", c.total_generation_capacity()},
            {"buses", buses},
            {"generators", gens},
            {"branches", branches}};
}

}  // namespace

void RequestLog::append(LogEntry e) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.push_back(std::move(e));
    ++unflushed_;
    if (entries_.size() > capacity_) {
        entries_.pop_front();
        unflushed_ = std::min(unflushed_, entries_.size());
    }
}

std::vector<LogEntry> RequestLog::entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return {entries_.begin(), entries_.end()};
}

std::size_t RequestLog::pending() const {
    std::lock_guard<std::mutex> lock(mu_);
    return unflushed_;
}

std::size_t RequestLog::flush(const std::string& path) {
    std::lock_guard<std::mutex> lock(mu_);
    if (unflushed_ == 0) return 0;
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to " + path);
    for (std::size_t i = entries_.size() - unflushed_; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        json j{{"method", e.method}, {"path", e.path}, {"request", e.request}, {"status", e.status}, {"digest", e.digest}};
        j["seed"] = e.seed ? json(*e.seed) : json(nullptr);
        out << j.dump() << '\n';
    }
    const std::size_t n = unflushed_;
    unflushed_ = 0;
    return n;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Gateway::Gateway(NetworkCase c, std::map<std::string, StoredModel> models, GatewayOptions options)
    : case_(std::move(c)), models_(std::move(models)), options_(std::move(options)) {
    if (models_.empty()) throw Error("gateway needs at least one model");
    for (const auto& [id, m] : models_) {
        if (scaler_of(m.model).dim() != case_.buses.size()) {
            throw DimensionError("model '" + id + "' expects " + std::to_string(scaler_of(m.model).dim()) +
                                 " features, case has " + std::to_string(case_.buses.size()) + " buses");
        }
    }
}

Gateway::~Gateway() {
    if (!options_.log_path.empty()) {
        try {
            log_.flush(options_.log_path);
        } catch (...) {
        }
    }
}

std::map<std::string, StoredModel> Gateway::load_models(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("model directory " + dir + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, StoredModel> out;
    for (const auto& f : files) out.emplace(f.stem().string(), load_model(f.string()));
    return out;
}

HttpResponse Gateway::handle(const std::string& method, const std::string& path, const std::string& body) {
    std::optional<std::uint64_t> seed;
    HttpResponse resp;
    try {
        resp = route(method, path, body, seed);
    } catch (const BadRequest& e) {
        resp = error_reply(400, "BadRequest", e.what());
    } catch (const DimensionError& e) {
        resp = error_reply(400, "DimensionError", e.what());
    } catch (const IndexError& e) {
        resp = error_reply(400, "IndexError", e.what());
    } catch (const json::exception& e) {
        resp = error_reply(400, "BadRequest", e.what());
    } catch (const NotFound& e) {
        resp = error_reply(404, "NotFound", e.what());
    } catch (const InputAlreadyFeasible& e) {
        resp = error_reply(409, "InputAlreadyFeasible", e.what());
    } catch (const RecoveryFailed& e) {
        resp = reply(422, {{"error", e.what()}, {"type", "RecoveryFailed"}, {"retries", e.retries_used()}});
    } catch (const StructurallyInfeasible& e) {
        resp = error_reply(422, "StructurallyInfeasible", e.what());
    } catch (const std::exception& e) {
        resp = reply(500, {{"error", e.what()}, {"type", "Internal"}, {"stage", path}});
    }
    if (seed && resp.status != 200) {
        json j = json::parse(resp.body, nullptr, false);
        if (j.is_object() && !j.contains("seed")) {
            j["seed"] = *seed;
            resp.body = j.dump();
        }
    }
    log_.append({method, path, body, seed, resp.status, fnv1a_hex(resp.body)});
    if (!options_.log_path.empty() && log_.pending() >= options_.flush_every) log_.flush(options_.log_path);
    return resp;
}

HttpResponse Gateway::route(const std::string& method, const std::string& path, const std::string& body,
                            std::optional<std::uint64_t>& seed) {
    const bool get = method == "GET";
    const bool post = method == "POST";
    if (get && path == "/case") return reply(200, case_summary(case_));
    if (get && path == "/models") {
        json arr = json::array();
        for (const auto& [id, m] : models_) {
            json entry{{"id", id}, {"kind", kind_of(m.model)}};
            entry["metrics"] = m.metrics ? metrics_to_json(*m.metrics) : json(nullptr);
            arr.push_back(entry);
        }
        return reply(200, {{"models", arr}});
    }
    if (!post || (path != "/classify" && path != "/baseline" && path != "/counterfactuals" && path != "/validate")) {
        throw NotFound("no route for " + method + " " + path);
    }

    json req;
    try {
        req = json::parse(body);
    } catch (const json::parse_error& e) {
        throw BadRequest(std::string("malformed JSON body: ") + e.what());
    }
    if (!req.is_object()) throw BadRequest("body must be a JSON object");
    const LoadProfile x = demand_of(req, case_);

    auto model_of = [&]() -> const ClassifierModel& {
        if (!req.contains("model") || !req["model"].is_string()) throw BadRequest("'model' must be a string");
        const auto it = models_.find(req["model"].get<std::string>());
        if (it == models_.end()) throw NotFound("unknown model '" + req["model"].get<std::string>() + "'");
        return it->second.model;
    };

    if (path == "/classify") {
        const ClassifierModel& m = model_of();
        const double p = predict_proba(m, x.demand);
        return reply(200, {{"label", to_string(p > 0.5 ? FeasibilityLabel::Feasible : FeasibilityLabel::Infeasible)},
                           {"proba", p},
                           {"logit", logit(m, x.demand)}});
    }
    if (path == "/validate") {
        if (check_feasibility(case_, x) == FeasibilityLabel::Infeasible) return reply(200, {{"feasible", false}});
        return reply(200, {{"feasible", true}, {"dispatch", dispatch_json(solve_dispatch(case_, x))}});
    }
    if (path == "/baseline") {
        std::optional<DemandBounds> bounds;
        if (req.contains("bounds") && !req["bounds"].is_null()) {
            const auto& b = req["bounds"];
            if (!b.is_object()) throw BadRequest("'bounds' must be an object with lower[] and upper[]");
            bounds = DemandBounds{number_array(b.value("lower", json()), x.size(), "bounds.lower"),
                                  number_array(b.value("upper", json()), x.size(), "bounds.upper")};
        }
        const RestorationResult r = restore_baseline(case_, x, bounds);
        return reply(200, {{"served", r.served_demand},
                           {"delta", r.delta},
                           {"total", r.total_adjustment},
                           {"dispatch", dispatch_json(r.dispatch)}});
    }

    // /counterfactuals
    const ClassifierModel& m = model_of();
    CfConfig cf = options_.cf;
    if (req.contains("k")) {
        if (!req["k"].is_number_integer() || req["k"].get<long long>() < 1 || req["k"].get<long long>() > 20) {
            throw BadRequest("'k' must be an integer in [1, 20]");
        }
        cf.k = req["k"].get<std::size_t>();
    }
    if (req.contains("lambda1")) cf.lambda1 = req["lambda1"].get<double>();
    if (req.contains("lambda2")) cf.lambda2 = req["lambda2"].get<double>();
    if (cf.lambda1 < 0.0 || cf.lambda2 < 0.0) throw BadRequest("lambda1 and lambda2 must be non-negative");
    if (req.contains("seed") && !req["seed"].is_null()) {
        if (!req["seed"].is_number_unsigned()) throw BadRequest("'seed' must be a non-negative integer");
        cf.seed = req["seed"].get<std::uint64_t>();
    } else {
        std::random_device rd;
        cf.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    seed = cf.seed;
    const bool allow_negative = req.value("allowNegative", false);
    CfConstraints cons = CfConstraints::defaults(case_, x, allow_negative);
    if (req.contains("freeze")) {
        if (!req["freeze"].is_array()) throw BadRequest("'freeze' must be an array of bus ids");
        for (const auto& id : req["freeze"]) {
            if (!id.is_number_integer()) throw BadRequest("'freeze' entries must be bus ids");
            cons.freeze(case_.bus_index(id.get<int>()), x);
        }
    }
    const ValidatedOptions v = restore_with_validation(case_, m, x, cons, cf, options_.max_retries);
    json out = counterfactuals_to_json(case_, v.options);
    out["seed"] = cf.seed;
    out["retries"] = v.retries_used;
    out["baseline"] = {{"total", v.baseline.total_adjustment}};
    return reply(200, out);
}

bool Gateway::serve(const std::string& host, int port) {
    server_ = std::make_unique<httplib::Server>();
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    server_->Get("/case", forward);
    server_->Get("/models", forward);
    server_->Post("/classify", forward);
    server_->Post("/baseline", forward);
    server_->Post("/counterfactuals", forward);
    server_->Post("/validate", forward);
    if (!options_.static_dir.empty() && !server_->set_mount_point("/", options_.static_dir)) {
        throw Error("cannot serve static files from " + options_.static_dir);
    }
    if (port == 0) {
        bound_port_ = server_->bind_to_any_port(host);
        if (bound_port_ < 0) return false;
    } else {
        if (!server_->bind_to_port(host, port)) return false;
        bound_port_ = port;
    }
    return server_->listen_after_bind();
}

void Gateway::stop() {
    if (server_) server_->stop();
}

}  // namespace gridcf
