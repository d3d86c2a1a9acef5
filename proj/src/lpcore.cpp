#include "gridcf/lpcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>

#include "gridcf/errors.hpp"

namespace gridcf {

std::span<double> DenseMatrix::append_row(std::size_t cols) {
    if (rows_ == 0 && cols_ == 0) cols_ = cols;
    if (cols != cols_) {
        throw DimensionError("row width " + std::to_string(cols) + " != matrix width " +
                             std::to_string(cols_));
    }
    data_.resize(data_.size() + cols_, 0.0);
    ++rows_;
    return row(rows_ - 1);
}

std::span<double> LinearProgram::add_equality(double rhs) {
    eq_rhs.push_back(rhs);
    return eq_matrix.append_row(num_vars());
}

std::span<double> LinearProgram::add_inequality(double rhs) {
    ineq_rhs.push_back(rhs);
    return ineq_matrix.append_row(num_vars());
}

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "Optimal";
        case LpStatus::Infeasible: return "Infeasible";
        case LpStatus::Unbounded: return "Unbounded";
    }
    return "?";
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;
constexpr std::ptrdiff_t kArtificial = -1;

// One constraint row after presolve: sign * source_row, with activity bounds.
struct RowRef {
    const double* coef = nullptr;
    double sign = 1.0;
    double lo = -kInf;
    double hi = kInf;
    bool equality = false;
};

std::size_t hash_row(std::span<const double> a, double sign) {
    std::size_t h = 1469598103934665603ull;
    for (double v : a) {
        const double x = sign * v + 0.0;  // fold -0.0 into 0.0
        h ^= std::hash<double>{}(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

bool same_row(std::span<const double> a, double sa, const double* b, double sb) {
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (sa * a[j] != sb * b[j]) return false;
    }
    return true;
}

class TableauSimplex {
public:
    TableauSimplex(std::size_t n, std::vector<RowRef> rows, const LinearProgram& lp,
                   const LpOptions& opt, std::size_t budget)
        : n_(n), m_(rows.size()), opt_(opt), budget_(budget) {
        std::size_t logicals = 0;
        for (const auto& r : rows) {
            if (!r.equality) ++logicals;
        }
        w_ = n_ + logicals;
        tab_.assign((m_ + 1) * w_, 0.0);
        beta_.assign(m_, 0.0);
        basis_.assign(m_, kArtificial);
        row_of_.assign(w_, -1);
        lb_.assign(w_, 0.0);
        ub_.assign(w_, 0.0);
        val_.assign(w_, 0.0);
        cost_.assign(w_, 0.0);

        for (std::size_t j = 0; j < n_; ++j) {
            lb_[j] = lp.lower[j];
            ub_[j] = lp.upper[j];
            cost_[j] = lp.objective[j];
            if (std::isfinite(lb_[j])) val_[j] = lb_[j];
            else if (std::isfinite(ub_[j])) val_[j] = ub_[j];
            else val_[j] = 0.0;
        }

        std::size_t logical = n_;
        for (std::size_t i = 0; i < m_; ++i) {
            const RowRef& r = rows[i];
            double activity = 0.0;
            for (std::size_t j = 0; j < n_; ++j) activity += r.sign * r.coef[j] * val_[j];
            double* t = row(i);
            if (r.equality) {
                const double gap = r.lo - activity;
                const double sigma = gap >= 0.0 ? 1.0 : -1.0;
                for (std::size_t j = 0; j < n_; ++j) t[j] = sigma * r.sign * r.coef[j];
                beta_[i] = std::abs(gap);
                continue;
            }
            const std::size_t s = logical++;
            lb_[s] = r.lo;
            ub_[s] = r.hi;
            if (activity >= r.lo && activity <= r.hi) {
                for (std::size_t j = 0; j < n_; ++j) t[j] = -r.sign * r.coef[j];
                t[s] = 1.0;
                basis_[i] = static_cast<std::ptrdiff_t>(s);
                row_of_[s] = static_cast<std::ptrdiff_t>(i);
                beta_[i] = activity;
            } else {
                const double bound = activity < r.lo ? r.lo : r.hi;
                val_[s] = bound;
                const double gap = bound - activity;
                const double sigma = gap >= 0.0 ? 1.0 : -1.0;
                for (std::size_t j = 0; j < n_; ++j) t[j] = sigma * r.sign * r.coef[j];
                t[s] = -sigma;
                beta_[i] = std::abs(gap);
            }
        }
    }

    // Returns false if phase 1 ends with positive infeasibility.
    bool phase1() {
        double* d = row(m_);
        std::fill(d, d + w_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] != kArtificial) continue;
            const double* t = row(i);
            for (std::size_t j = 0; j < w_; ++j) d[j] -= t[j];
        }
        artificial_ub_ = kInf;
        iterate(/*allow_unbounded=*/false);

        double infeasibility = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] == kArtificial) infeasibility += std::max(0.0, beta_[i]);
        }
        if (infeasibility > opt_.feasibility_tol) return false;
        drive_out_artificials();
        artificial_ub_ = 0.0;
        return true;
    }

    // Returns false if the objective is unbounded below.
    bool phase2() {
        double* d = row(m_);
        std::copy(cost_.begin(), cost_.end(), d);
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] == kArtificial) continue;
            const double cb = cost_[static_cast<std::size_t>(basis_[i])];
            if (cb == 0.0) continue;
            const double* t = row(i);
            for (std::size_t j = 0; j < w_; ++j) d[j] -= cb * t[j];
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] != kArtificial) d[basis_[i]] = 0.0;
        }
        bland_ = false;
        degenerate_run_ = 0;
        return iterate(/*allow_unbounded=*/true);
    }

    std::vector<double> structural_values() const {
        std::vector<double> x(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            double v = row_of_[j] >= 0 ? beta_[static_cast<std::size_t>(row_of_[j])] : val_[j];
            if (v < lb_[j]) v = lb_[j];
            if (v > ub_[j]) v = ub_[j];
            x[j] = v;
        }
        return x;
    }

    std::size_t iterations() const { return iterations_; }

private:
    double* row(std::size_t i) { return tab_.data() + i * w_; }
    const double* row(std::size_t i) const { return tab_.data() + i * w_; }

    double basic_lb(std::size_t i) const {
        return basis_[i] == kArtificial ? 0.0 : lb_[static_cast<std::size_t>(basis_[i])];
    }
    double basic_ub(std::size_t i) const {
        return basis_[i] == kArtificial ? artificial_ub_ : ub_[static_cast<std::size_t>(basis_[i])];
    }

    // Chooses an entering column; returns false at optimality.
    bool price(std::size_t& q, double& dir) const {
        const double* d = row(m_);
        double best = 0.0;
        bool found = false;
        for (std::size_t j = 0; j < w_; ++j) {
            if (row_of_[j] >= 0 || lb_[j] == ub_[j]) continue;
            const double dj = d[j];
            double score = 0.0;
            double sdir = 0.0;
            if (dj < -opt_.optimality_tol && val_[j] < ub_[j]) {
                score = -dj;
                sdir = 1.0;
            } else if (dj > opt_.optimality_tol && val_[j] > lb_[j]) {
                score = dj;
                sdir = -1.0;
            } else {
                continue;
            }
            if (bland_) {
                q = j;
                dir = sdir;
                return true;
            }
            if (score > best) {
                best = score;
                q = j;
                dir = sdir;
                found = true;
            }
        }
        return found;
    }

    bool iterate(bool allow_unbounded) {
        for (;;) {
            std::size_t q = 0;
            double dir = 0.0;
            if (!price(q, dir)) return true;
            if (++iterations_ > budget_) {
                throw IterationLimit("simplex exceeded pivot budget of " + std::to_string(budget_));
            }

            // Harris two-pass ratio test.
            const double delta = opt_.feasibility_tol;
            double relaxed = ub_[q] - lb_[q];
            for (std::size_t i = 0; i < m_; ++i) {
                const double alpha = dir * row(i)[q];
                if (alpha > kPivotTol) {
                    const double lb = basic_lb(i);
                    if (std::isfinite(lb)) relaxed = std::min(relaxed, (beta_[i] - lb + delta) / alpha);
                } else if (alpha < -kPivotTol) {
                    const double ub = basic_ub(i);
                    if (std::isfinite(ub)) relaxed = std::min(relaxed, (ub - beta_[i] + delta) / -alpha);
                }
            }
            if (!std::isfinite(relaxed)) {
                if (allow_unbounded) return false;
                throw Error("simplex: unbounded ray in phase 1");
            }

            std::ptrdiff_t leave = -1;
            double step = 0.0;
            double best_alpha = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double alpha = dir * row(i)[q];
                double ratio;
                if (alpha > kPivotTol) {
                    const double lb = basic_lb(i);
                    if (!std::isfinite(lb)) continue;
                    ratio = (beta_[i] - lb) / alpha;
                } else if (alpha < -kPivotTol) {
                    const double ub = basic_ub(i);
                    if (!std::isfinite(ub)) continue;
                    ratio = (ub - beta_[i]) / -alpha;
                } else {
                    continue;
                }
                if (ratio > relaxed) continue;
                ratio = std::max(ratio, 0.0);
                bool take;
                if (bland_) {
                    take = leave < 0 || ratio < step - kDegenerateStep ||
                           (ratio <= step + kDegenerateStep && basis_order(i) < basis_order(leave));
                } else {
                    take = std::abs(alpha) > best_alpha;
                }
                if (take) {
                    leave = static_cast<std::ptrdiff_t>(i);
                    step = ratio;
                    best_alpha = std::abs(alpha);
                }
            }

            const double range = ub_[q] - lb_[q];
            const bool flip = leave < 0 || (std::isfinite(range) && range <= step);
            if (flip) step = range;

            if (step <= kDegenerateStep) {
                if (++degenerate_run_ >= opt_.bland_after) bland_ = true;
            } else {
                degenerate_run_ = 0;
            }

            if (step > 0.0) {
                for (std::size_t i = 0; i < m_; ++i) {
                    const double a = row(i)[q];
                    if (a != 0.0) beta_[i] -= step * dir * a;
                }
            }
            if (flip) {
                val_[q] = dir > 0.0 ? ub_[q] : lb_[q];
                continue;
            }

            const auto r = static_cast<std::size_t>(leave);
            const double alpha = dir * row(r)[q];
            const std::ptrdiff_t out = basis_[r];
            if (out != kArtificial) {
                const auto o = static_cast<std::size_t>(out);
                val_[o] = alpha > 0.0 ? lb_[o] : ub_[o];
                row_of_[o] = -1;
            }
            beta_[r] = val_[q] + dir * step;
            pivot(r, q);
        }
    }

    std::size_t basis_order(std::size_t i) const {
        return basis_[i] == kArtificial ? w_ + i : static_cast<std::size_t>(basis_[i]);
    }
    std::size_t basis_order(std::ptrdiff_t i) const { return basis_order(static_cast<std::size_t>(i)); }

    // Makes column q basic in row r. beta_ must already hold post-step values.
    void pivot(std::size_t r, std::size_t q) {
        double* pr = row(r);
        const double inv = 1.0 / pr[q];
        nz_.clear();
        for (std::size_t j = 0; j < w_; ++j) {
            if (pr[j] != 0.0) {
                pr[j] *= inv;
                if (std::abs(pr[j]) < 1e-14) pr[j] = 0.0;
                else nz_.push_back(j);
            }
        }
        pr[q] = 1.0;
        const bool dense = nz_.size() * 3 > w_;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* t = row(i);
            const double f = t[q];
            if (f == 0.0) continue;
            if (dense) {
                for (std::size_t j = 0; j < w_; ++j) t[j] -= f * pr[j];
            } else {
                for (std::size_t j : nz_) t[j] -= f * pr[j];
            }
            t[q] = 0.0;
        }
        basis_[r] = static_cast<std::ptrdiff_t>(q);
        row_of_[q] = static_cast<std::ptrdiff_t>(r);
    }

    void drive_out_artificials() {
        for (std::size_t r = 0; r < m_; ++r) {
            if (basis_[r] != kArtificial) continue;
            const double* t = row(r);
            std::size_t best = w_;
            double best_abs = 1e-7;
            for (std::size_t j = 0; j < w_; ++j) {
                if (row_of_[j] >= 0) continue;
                if (std::abs(t[j]) > best_abs) {
                    best_abs = std::abs(t[j]);
                    best = j;
                }
            }
            if (best == w_) continue;  // redundant row; the artificial stays pinned at 0
            beta_[r] = val_[best];
            pivot(r, best);
        }
    }

    std::size_t n_;
    std::size_t m_;
    std::size_t w_ = 0;
    LpOptions opt_;
    std::size_t budget_;
    std::vector<double> tab_;
    std::vector<double> beta_;
    std::vector<std::ptrdiff_t> basis_;
    std::vector<std::ptrdiff_t> row_of_;
    std::vector<double> lb_, ub_, val_, cost_;
    std::vector<std::size_t> nz_;
    double artificial_ub_ = kInf;
    bool bland_ = false;
    std::size_t degenerate_run_ = 0;
    std::size_t iterations_ = 0;
};

double max_violation(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = 0.0;
    const std::size_t n = lp.num_vars();
    for (std::size_t j = 0; j < n; ++j) {
        worst = std::max({worst, lp.lower[j] - x[j], x[j] - lp.upper[j]});
    }
    for (std::size_t i = 0; i < lp.eq_matrix.rows(); ++i) {
        const auto a = lp.eq_matrix.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[j] * x[j];
        worst = std::max(worst, std::abs(s - lp.eq_rhs[i]));
    }
    for (std::size_t i = 0; i < lp.ineq_matrix.rows(); ++i) {
        const auto a = lp.ineq_matrix.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[j] * x[j];
        worst = std::max(worst, s - lp.ineq_rhs[i]);
    }
    return worst;
}

LpOutcome infeasible_outcome() {
    LpOutcome out;
    out.status = LpStatus::Infeasible;
    return out;
}

}  // namespace

LpOutcome solve_lp(const LinearProgram& lp, const LpOptions& options) {
    const std::size_t n = lp.num_vars();
    if (lp.lower.size() != n || lp.upper.size() != n) {
        throw DimensionError("bound vectors must match the objective length");
    }
    if (lp.eq_matrix.rows() != lp.eq_rhs.size() || lp.ineq_matrix.rows() != lp.ineq_rhs.size()) {
        throw DimensionError("rhs length does not match row count");
    }
    if ((lp.eq_matrix.rows() > 0 && lp.eq_matrix.cols() != n) ||
        (lp.ineq_matrix.rows() > 0 && lp.ineq_matrix.cols() != n)) {
        throw DimensionError("constraint matrix column count does not match variable count");
    }
    const double tol = options.feasibility_tol;
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(lp.lower[j]) || std::isnan(lp.upper[j])) {
            throw DimensionError("NaN variable bound");
        }
        if (lp.lower[j] > lp.upper[j]) return infeasible_outcome();
    }

    std::vector<RowRef> rows;
    rows.reserve(lp.eq_matrix.rows() + lp.ineq_matrix.rows());
    auto is_zero_row = [](std::span<const double> a) {
        return std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
    };
    for (std::size_t i = 0; i < lp.eq_matrix.rows(); ++i) {
        const auto a = lp.eq_matrix.row(i);
        if (is_zero_row(a)) {
            if (std::abs(lp.eq_rhs[i]) > tol) return infeasible_outcome();
            continue;
        }
        rows.push_back({a.data(), 1.0, lp.eq_rhs[i], lp.eq_rhs[i], true});
    }

    // Pairs  a x <= u  and  -a x <= -l  collapse into one ranged row.
    std::unordered_map<std::size_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < lp.ineq_matrix.rows(); ++i) {
        const auto a = lp.ineq_matrix.row(i);
        const auto lead = std::find_if(a.begin(), a.end(), [](double v) { return v != 0.0; });
        if (lead == a.end()) {
            if (lp.ineq_rhs[i] < -tol) return infeasible_outcome();
            continue;
        }
        const double sign = *lead > 0.0 ? 1.0 : -1.0;
        auto& bucket = buckets[hash_row(a, sign)];
        std::size_t target = rows.size();
        for (std::size_t k : bucket) {
            if (same_row(a, sign, rows[k].coef, rows[k].sign)) {
                target = k;
                break;
            }
        }
        if (target == rows.size()) {
            rows.push_back({a.data(), sign, -kInf, kInf, false});
            bucket.push_back(target);
        }
        // sign * (a x) is the normalized activity.
        if (sign > 0.0) rows[target].hi = std::min(rows[target].hi, lp.ineq_rhs[i]);
        else rows[target].lo = std::max(rows[target].lo, -lp.ineq_rhs[i]);
    }
    for (const auto& r : rows) {
        if (!r.equality && r.lo > r.hi + tol) return infeasible_outcome();
    }
    for (auto& r : rows) {
        if (!r.equality && r.lo > r.hi) r.lo = r.hi;
    }

    const std::size_t budget = options.pivot_budget
                                   ? options.pivot_budget
                                   : 50 * (lp.eq_matrix.rows() + lp.ineq_matrix.rows() + n);
    TableauSimplex simplex(n, std::move(rows), lp, options, budget);

    LpOutcome out;
    if (!simplex.phase1()) {
        out.status = LpStatus::Infeasible;
        out.iterations = simplex.iterations();
        return out;
    }
    if (!options.phase1_only && !simplex.phase2()) {
        out.status = LpStatus::Unbounded;
        out.iterations = simplex.iterations();
        return out;
    }
    std::vector<double> x = simplex.structural_values();
    double obj = 0.0;
    if (!options.phase1_only) {
        for (std::size_t j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
    }
    out.status = LpStatus::Optimal;
    out.max_violation = max_violation(lp, x);
    out.solution = std::move(x);
    out.objective_value = obj;
    out.iterations = simplex.iterations();
    return out;
}

}  // namespace gridcf
