#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gridcf/cfx.hpp"
#include "gridcf/errors.hpp"

namespace gridcf {

namespace {

constexpr double kMadFloor = 1e-4;

double determinant(std::vector<double> m, std::size_t n) {
    double det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
        }
        if (m[piv * n + c] == 0.0) return 0.0;
        if (piv != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m[c * n + j], m[piv * n + j]);
            det = -det;
        }
        const double p = m[c * n + c];
        det *= p;
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = m[r * n + c] / p;
            if (f == 0.0) continue;
            for (std::size_t j = c; j < n; ++j) m[r * n + j] -= f * m[c * n + j];
        }
    }
    return det;
}

double kernel_det(const std::vector<std::vector<double>>& pair_dist) {
    const std::size_t n = pair_dist.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) k[i * n + j] = 1.0 / (1.0 + pair_dist[i][j]);
    }
    return determinant(std::move(k), n);
}

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Candidate {
    std::vector<double> values;  // raw MW, full length
    double logit = 0.0;
    double proba = 0.0;
    double dist = 0.0;  // to x
    bool valid() const { return proba > 0.5; }
};

struct Individual {
    std::vector<Candidate> options;
    double total = 0.0;
};

class GeneticSearch {
public:
    GeneticSearch(const ClassifierModel& model, const LoadProfile& x, const CfConstraints& cons,
                  const CfConfig& config)
        : model_(model), x_(x), cons_(cons), config_(config), rng_(mix(config.seed)) {
        const FeatureScaler& scaler = scaler_of(model);
        const auto& mads = mads_of(model);
        const std::size_t d = x.size();
        weight_.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            weight_[j] = 1.0 / (scaler.range(j) * std::max(mads[j], kMadFloor) * static_cast<double>(d));
            if (cons.actionable[j] && cons.upper[j] > cons.lower[j]) act_.push_back(j);
        }
        kernel_scale_ = config.summed_kernel ? static_cast<double>(d) : 1.0;
    }

    CounterfactualSet run() {
        std::vector<Individual> pop(config_.population);
        for (auto& ind : pop) {
            ind.options.resize(config_.k);
            for (auto& o : ind.options) init_option(o);
            evaluate(ind);
        }
        Individual best = *best_of(pop);

        std::vector<Individual> next;
        for (std::size_t gen = 0; gen < config_.generations && !act_.empty(); ++gen) {
            std::vector<std::size_t> order(pop.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return pop[a].total < pop[b].total; });
            next.clear();
            for (std::size_t e = 0; e < std::min(config_.elites, pop.size()); ++e) next.push_back(pop[order[e]]);
            while (next.size() < pop.size()) {
                const Individual& a = pop[tournament(pop)];
                const Individual& b = pop[tournament(pop)];
                Individual child = crossover(a, b);
                for (auto& o : child.options) mutate(o);
                evaluate(child);
                next.push_back(std::move(child));
            }
            pop.swap(next);
            const Individual& gen_best = *best_of(pop);
            if (gen_best.total < best.total) best = gen_best;
        }
        return assemble(best);
    }

private:
    double weighted_distance(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0.0;
        for (std::size_t j : act_) s += std::abs(a[j] - b[j]) * weight_[j];
        return s;
    }

    void init_option(Candidate& o) {
        o.values = x_.demand;
        if (!act_.empty()) {
            const std::size_t n = act_.size();
            std::geometric_distribution<std::size_t> small(config_.init_subset_p);
            std::uniform_int_distribution<std::size_t> any(1, n);
            const std::size_t count = std::bernoulli_distribution(config_.init_wide_fraction)(rng_)
                                          ? any(rng_)
                                          : std::min(n, 1 + small(rng_));
            std::vector<std::size_t> pick = act_;
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (std::size_t t = 0; t < count; ++t) {
                std::uniform_int_distribution<std::size_t> at(t, n - 1);
                std::swap(pick[t], pick[at(rng_)]);
                const std::size_t j = pick[t];
                const double start = std::clamp(x_[j], cons_.lower[j], cons_.upper[j]);
                o.values[j] = start - u(rng_) * (start - cons_.lower[j]);
            }
        }
        clip(o);
    }

    void clip(Candidate& o) const {
        for (std::size_t j = 0; j < o.values.size(); ++j) {
            o.values[j] = std::clamp(o.values[j], cons_.lower[j], cons_.upper[j]);
        }
    }

    void evaluate(Individual& ind) {
        const std::size_t k = ind.options.size();
        double yl = 0.0, dist = 0.0;
        for (auto& o : ind.options) {
            o.logit = logit(model_, o.values);
            o.proba = predict_proba(model_, o.values);
            o.dist = weighted_distance(o.values, x_.demand);
            yl += hinge_yloss(o.logit, 1);
            dist += o.dist;
            if (o.valid()) archive(o);
        }
        std::vector<std::vector<double>> pd(k, std::vector<double>(k, 0.0));
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                pd[i][j] = pd[j][i] = kernel_scale_ * weighted_distance(ind.options[i].values, ind.options[j].values);
            }
        }
        const double kd = static_cast<double>(k);
        ind.total = yl / kd + config_.lambda1 * dist / kd - config_.lambda2 * kernel_det(pd);
    }

    double score(const Candidate& o) const { return hinge_yloss(o.logit, 1) + config_.lambda1 * o.dist; }

    void archive(const Candidate& o) {
        const std::size_t cap = std::max<std::size_t>(16, 4 * config_.k);
        const double s = score(o);
        if (archive_.size() >= cap && s >= score(archive_.back())) return;
        for (const auto& a : archive_) {
            if (a.values == o.values) return;
        }
        auto pos = std::upper_bound(archive_.begin(), archive_.end(), s,
                                    [&](double v, const Candidate& a) { return v < score(a); });
        archive_.insert(pos, o);
        if (archive_.size() > cap) archive_.pop_back();
    }

    std::size_t tournament(const std::vector<Individual>& pop) {
        std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
        std::size_t best = pick(rng_);
        for (std::size_t t = 1; t < config_.tournament; ++t) {
            const std::size_t c = pick(rng_);
            if (pop[c].total < pop[best].total) best = c;
        }
        return best;
    }

    Individual crossover(const Individual& a, const Individual& b) {
        Individual child = a;
        for (std::size_t s = 0; s < child.options.size(); ++s) {
            auto& values = child.options[s].values;
            const auto& other = b.options[s].values;
            std::uint64_t bits = 0;
            for (std::size_t t = 0; t < act_.size(); ++t) {
                if (t % 64 == 0) bits = rng_();
                if (bits & 1) values[act_[t]] = other[act_[t]];
                bits >>= 1;
            }
        }
        return child;
    }

    void mutate(Candidate& o) {
        const std::size_t n = act_.size();
        std::binomial_distribution<std::size_t> hits(n, 1.0 / static_cast<double>(n));
        std::uniform_int_distribution<std::size_t> at(0, n - 1);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::bernoulli_distribution reset(config_.reset_probability);
        const std::size_t count = hits(rng_);
        for (std::size_t t = 0; t < count; ++t) {
            const std::size_t j = act_[at(rng_)];
            if (reset(rng_)) {
                o.values[j] = std::clamp(x_[j], cons_.lower[j], cons_.upper[j]);
                continue;
            }
            const double sigma = config_.mutation_sigma * (cons_.upper[j] - cons_.lower[j]);
            o.values[j] = std::clamp(o.values[j] + sigma * gauss(rng_), cons_.lower[j], cons_.upper[j]);
        }
    }

    static const Individual* best_of(const std::vector<Individual>& pop) {
        const Individual* best = &pop.front();
        for (const auto& ind : pop) {
            if (ind.total < best->total) best = &ind;
        }
        return best;
    }

    CounterfactualSet assemble(const Individual& best) {
        std::vector<const Candidate*> pool;
        for (const auto& o : best.options) {
            if (o.valid()) pool.push_back(&o);
        }
        for (const auto& o : archive_) pool.push_back(&o);

        std::vector<LoadProfile> chosen;
        auto distinct = [&](const LoadProfile& p) {
            return std::none_of(chosen.begin(), chosen.end(), [&](const LoadProfile& q) { return q == p; });
        };
        for (const Candidate* c : pool) {
            if (chosen.size() >= config_.k) break;
            const LoadProfile raw(c->values);
            LoadProfile sparse = sparsify(model_, x_, raw, config_.sparsity_threshold);
            if (config_.tighten_steps > 0) sparse = tighten(model_, x_, sparse, config_.tighten_steps);
            if (distinct(sparse)) chosen.push_back(std::move(sparse));
            else if (distinct(raw)) chosen.push_back(raw);
        }

        CounterfactualSet out;
        out.config = config_;
        out.exhausted = chosen.size() < config_.k;
        const FeatureScaler& scaler = scaler_of(model_);
        const auto& mads = mads_of(model_);
        const auto xn = scaler.normalize(x_.demand);
        for (auto& p : chosen) {
            CfOption o;
            o.delta.resize(p.size());
            for (std::size_t j = 0; j < p.size(); ++j) {
                o.delta[j] = x_[j] - p[j];
                if (o.delta[j] != 0.0) ++o.changed;
            }
            o.proba = predict_proba(model_, p.demand);
            o.logit = logit(model_, p.demand);
            o.distance = distance(scaler.normalize(p.demand), xn, mads);
            o.profile = std::move(p);
            out.options.push_back(std::move(o));
        }
        if (!out.options.empty()) {
            std::vector<LoadProfile> profiles;
            for (const auto& o : out.options) profiles.push_back(o.profile);
            out.objective = cf_objective(profiles, x_, model_, config_);
        }
        return out;
    }

    const ClassifierModel& model_;
    const LoadProfile& x_;
    const CfConstraints& cons_;
    const CfConfig& config_;
    std::mt19937_64 rng_;
    std::vector<double> weight_;
    std::vector<std::size_t> act_;
    double kernel_scale_ = 1.0;
    std::vector<Candidate> archive_;  // valid options, best score first
};

}  // namespace

CfConstraints CfConstraints::defaults(const NetworkCase& c, const LoadProfile& x, bool allow_negative) {
    if (x.size() != c.buses.size()) {
        throw DimensionError("profile has " + std::to_string(x.size()) + " entries, case has " +
                             std::to_string(c.buses.size()) + " buses");
    }
    CfConstraints out;
    out.allow_negative = allow_negative;
    const std::size_t n = x.size();
    out.actionable.assign(n, false);
    out.lower.resize(n);
    out.upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.actionable[i] = c.buses[i].nominal_load != 0.0;
        out.upper[i] = x[i];
        out.lower[i] = out.actionable[i] ? (allow_negative ? -std::abs(x[i]) : 0.0) : x[i];
        if (out.lower[i] > out.upper[i]) out.lower[i] = out.upper[i];
    }
    return out;
}

void CfConstraints::freeze(std::size_t bus, const LoadProfile& x) {
    if (bus >= size()) throw IndexError("bus index " + std::to_string(bus) + " out of range");
    actionable[bus] = false;
    lower[bus] = upper[bus] = x[bus];
}

std::size_t CfConstraints::actionable_count() const {
    return static_cast<std::size_t>(std::count(actionable.begin(), actionable.end(), true));
}

void CfConstraints::check(const LoadProfile& x) const {
    if (lower.size() != x.size() || upper.size() != x.size() || actionable.size() != x.size()) {
        throw DimensionError("constraints do not match the profile length");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(lower[i] <= upper[i])) throw Error("bus " + std::to_string(i) + ": lower bound above upper bound");
        if (!actionable[i] && (lower[i] != x[i] || upper[i] != x[i])) {
            throw Error("bus " + std::to_string(i) + ": frozen bus must have bounds [x_i, x_i]");
        }
    }
}

bool CfConstraints::satisfied_by(const LoadProfile& x, const LoadProfile& c) const {
    if (c.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
        if (!actionable[i] && c[i] != x[i]) return false;
        if (c[i] < lower[i] || c[i] > upper[i]) return false;
    }
    return true;
}

DemandBounds CfConstraints::baseline_bounds(const LoadProfile& x) const {
    DemandBounds b = DemandBounds::curtailment(x);
    if (allow_negative) {
        for (std::size_t i = 0; i < x.size(); ++i) b.lower[i] = -std::abs(x[i]);
    }
    return b;
}

void CfConfig::check() const {
    if (k < 1) throw Error("k must be at least 1");
    if (lambda1 < 0.0 || lambda2 < 0.0) throw Error("lambda1 and lambda2 must be non-negative");
    if (population < 2) throw Error("population must be at least 2");
    if (tournament < 1) throw Error("tournament size must be at least 1");
    if (!(init_subset_p > 0.0 && init_subset_p <= 1.0)) throw Error("init_subset_p must be in (0, 1]");
    if (!(reset_probability >= 0.0 && reset_probability <= 1.0)) throw Error("reset_probability must be in [0, 1]");
    if (!(init_wide_fraction >= 0.0 && init_wide_fraction <= 1.0)) throw Error("init_wide_fraction must be in [0, 1]");
}

double CfOption::total_adjustment() const {
    double s = 0.0;
    for (double d : delta) s += std::abs(d);
    return s;
}

double hinge_yloss(double logit_value, int target) {
    const double z = target == 1 ? 1.0 : -1.0;
    return std::max(0.0, 1.0 - z * logit_value);
}

double distance(std::span<const double> a, std::span<const double> b, std::span<const double> mads) {
    if (a.size() != b.size() || a.size() != mads.size()) {
        throw DimensionError("distance: length mismatch");
    }
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]) / std::max(mads[j], kMadFloor);
    return s / static_cast<double>(a.size());
}

double dpp_diversity(const std::vector<std::vector<double>>& normalized, std::span<const double> mads, bool summed) {
    const std::size_t k = normalized.size();
    const double scale = summed ? static_cast<double>(mads.size()) : 1.0;
    std::vector<std::vector<double>> pd(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            pd[i][j] = pd[j][i] = scale * distance(normalized[i], normalized[j], mads);
        }
    }
    return kernel_det(pd);
}

CfObjective cf_objective(const std::vector<LoadProfile>& options, const LoadProfile& x,
                         const ClassifierModel& model, const CfConfig& config) {
    CfObjective out;
    if (options.empty()) return out;
    const FeatureScaler& scaler = scaler_of(model);
    const auto& mads = mads_of(model);
    const auto xn = scaler.normalize(x.demand);
    std::vector<std::vector<double>> normalized;
    for (const auto& c : options) {
        out.yloss += hinge_yloss(logit(model, c.demand), 1);
        normalized.push_back(scaler.normalize(c.demand));
        out.distance += distance(normalized.back(), xn, mads);
    }
    const double k = static_cast<double>(options.size());
    out.yloss /= k;
    out.distance /= k;
    out.dpp = dpp_diversity(normalized, mads, config.summed_kernel);
    out.total = out.yloss + config.lambda1 * out.distance - config.lambda2 * out.dpp;
    return out;
}

LoadProfile sparsify(const ClassifierModel& model, const LoadProfile& x, const LoadProfile& option,
                     double threshold) {
    if (x.size() != option.size()) throw DimensionError("sparsify: length mismatch");
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double change = std::abs(option[j] - x[j]);
        if (change > 0.0 && change < threshold) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(option[a] - x[a]) < std::abs(option[b] - x[b]);
    });
    LoadProfile out = option;
    for (std::size_t j : idx) {
        const double kept = out[j];
        out[j] = x[j];
        if (!(predict_proba(model, out.demand) > 0.5)) out[j] = kept;
    }
    return out;
}

LoadProfile tighten(const ClassifierModel& model, const LoadProfile& x, const LoadProfile& option,
                    std::size_t steps) {
    if (x.size() != option.size()) throw DimensionError("tighten: length mismatch");
    const double limit = std::max(hinge_yloss(logit(model, option.demand), 1), 0.0);
    auto ok = [&](const LoadProfile& p) {
        return predict_proba(model, p.demand) > 0.5 && hinge_yloss(logit(model, p.demand), 1) <= limit;
    };
    if (!ok(option)) return option;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (option[j] != x[j]) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(option[a] - x[a]) > std::abs(option[b] - x[b]);
    });
    LoadProfile out = option;
    for (std::size_t j : idx) {
        const double full = out[j];
        double lo = 0.0, hi = 1.0;  // fraction of the change kept; hi always valid
        out[j] = x[j];
        if (ok(out)) continue;
        for (std::size_t s = 0; s < steps; ++s) {
            const double mid = 0.5 * (lo + hi);
            out[j] = x[j] + mid * (full - x[j]);
            if (ok(out)) hi = mid;
            else lo = mid;
        }
        out[j] = x[j] + hi * (full - x[j]);
    }
    return out;
}

CounterfactualSet generate_counterfactuals(const ClassifierModel& model, const LoadProfile& x,
                                           const CfConstraints& constraints, const CfConfig& config) {
    config.check();
    if (x.size() != scaler_of(model).dim()) {
        throw DimensionError("profile has " + std::to_string(x.size()) + " entries, model expects " +
                             std::to_string(scaler_of(model).dim()));
    }
    constraints.check(x);
    if (predict_proba(model, x.demand) > 0.5) {
        throw InputAlreadyFeasible("profile is already classified feasible");
    }
    return GeneticSearch(model, x, constraints, config).run();
}

nlohmann::json cf_config_to_json(const CfConfig& c) {
    return {{"k", c.k},
            {"lambda1", c.lambda1},
            {"lambda2", c.lambda2},
            {"generations", c.generations},
            {"population", c.population},
            {"sparsity_threshold", c.sparsity_threshold},
            {"seed", c.seed},
            {"tournament", c.tournament},
            {"elites", c.elites},
            {"mutation_sigma", c.mutation_sigma},
            {"init_subset_p", c.init_subset_p},
            {"init_wide_fraction", c.init_wide_fraction},
            {"summed_kernel", c.summed_kernel},
            {"reset_probability", c.reset_probability},
            {"tighten_steps", c.tighten_steps}};
}

CfConfig cf_config_from_json(const nlohmann::json& j, CfConfig base) {
    base.k = j.value("k", base.k);
    base.lambda1 = j.value("lambda1", base.lambda1);
    base.lambda2 = j.value("lambda2", base.lambda2);
    base.generations = j.value("generations", base.generations);
    base.population = j.value("population", base.population);
    base.sparsity_threshold = j.value("sparsity_threshold", base.sparsity_threshold);
    base.seed = j.value("seed", base.seed);
    base.tournament = j.value("tournament", base.tournament);
    base.elites = j.value("elites", base.elites);
    base.mutation_sigma = j.value("mutation_sigma", base.mutation_sigma);
    base.init_subset_p = j.value("init_subset_p", base.init_subset_p);
    base.init_wide_fraction = j.value("init_wide_fraction", base.init_wide_fraction);
    base.summed_kernel = j.value("summed_kernel", base.summed_kernel);
    base.reset_probability = j.value("reset_probability", base.reset_probability);
    base.tighten_steps = j.value("tighten_steps", base.tighten_steps);
    return base;
}

nlohmann::json option_to_json(const NetworkCase& c, const CfOption& o) {
    nlohmann::json delta = nlohmann::json::object();
    for (std::size_t i = 0; i < o.delta.size(); ++i) {
        if (o.delta[i] != 0.0) delta[std::to_string(c.buses[i].id)] = o.delta[i];
    }
    return {{"delta", delta},
            {"proba", o.proba},
            {"logit", o.logit},
            {"distance", o.distance},
            {"changed", o.changed},
            {"total", o.total_adjustment()},
            {"validated", o.validated}};
}

nlohmann::json counterfactuals_to_json(const NetworkCase& c, const CounterfactualSet& set) {
    nlohmann::json options = nlohmann::json::array();
    for (const auto& o : set.options) options.push_back(option_to_json(c, o));
    return {{"options", options},
            {"objective",
             {{"yloss", set.objective.yloss},
              {"dist", set.objective.distance},
              {"dpp", set.objective.dpp},
              {"total", set.objective.total}}},
            {"config", cf_config_to_json(set.config)},
            {"seed", set.config.seed},
            {"exhausted", set.exhausted}};
}

}  // namespace gridcf
