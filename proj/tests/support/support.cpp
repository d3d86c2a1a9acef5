#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gridcf::testing {

std::string fixture(const std::string& name) { return std::string(GRIDCF_FIXTURE_DIR) + "/" + name; }
std::string data_file(const std::string& name) { return std::string(GRIDCF_DATA_DIR) + "/" + name; }

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

struct Row {
    std::vector<double> a;
    double b = 0.0;  // a.x <= b, or a.x == b when pinned
};

bool solve_square(std::vector<std::vector<double>> m, std::vector<double> rhs, std::vector<double>& x) {
    const std::size_t n = rhs.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
        }
        if (std::abs(m[p][c]) < 1e-10) return false;
        std::swap(m[p], m[c]);
        std::swap(rhs[p], rhs[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = m[r][c] / m[c][c];
            for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= m[i][k] * x[k];
        x[i] = s / m[i][i];
    }
    return true;
}

BruteOutcome enumerate(const LinearProgram& lp, double box) {
    const std::size_t n = lp.num_vars();
    std::vector<Row> eq, cand;
    for (std::size_t r = 0; r < lp.eq_rhs.size(); ++r) {
        auto row = lp.eq_matrix.row(r);
        eq.push_back({{row.begin(), row.end()}, lp.eq_rhs[r]});
    }
    for (std::size_t r = 0; r < lp.ineq_rhs.size(); ++r) {
        auto row = lp.ineq_matrix.row(r);
        cand.push_back({{row.begin(), row.end()}, lp.ineq_rhs[r]});
    }
    for (std::size_t j = 0; j < n; ++j) {
        Row lo{std::vector<double>(n, 0.0), 0.0}, hi{std::vector<double>(n, 0.0), 0.0};
        lo.a[j] = -1.0;
        lo.b = std::isfinite(lp.lower[j]) ? -lp.lower[j] : box;
        hi.a[j] = 1.0;
        hi.b = std::isfinite(lp.upper[j]) ? lp.upper[j] : box;
        cand.push_back(lo);
        cand.push_back(hi);
    }

    BruteOutcome best;
    if (eq.size() > n) return best;
    const std::size_t pick = n - eq.size();
    std::vector<bool> mask(cand.size(), false);
    std::fill(mask.begin(), mask.begin() + static_cast<long>(std::min(pick, cand.size())), true);
    if (pick > cand.size()) return best;
    bool found = false;
    do {
        std::vector<std::vector<double>> m;
        std::vector<double> rhs;
        for (const Row& r : eq) {
            m.push_back(r.a);
            rhs.push_back(r.b);
        }
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (mask[i]) {
                m.push_back(cand[i].a);
                rhs.push_back(cand[i].b);
            }
        }
        std::vector<double> x;
        if (!solve_square(m, rhs, x)) continue;
        bool ok = true;
        for (const Row& r : eq) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += r.a[j] * x[j];
            ok = ok && std::abs(s - r.b) <= 1e-7 * (1.0 + std::abs(r.b));
        }
        for (const Row& r : cand) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += r.a[j] * x[j];
            ok = ok && s <= r.b + 1e-7 * (1.0 + std::abs(r.b));
        }
        if (!ok) continue;
        double obj = 0.0;
        for (std::size_t j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
        if (!found || obj < best.objective) best.objective = obj;
        found = true;
    } while (std::prev_permutation(mask.begin(), mask.end()));
    best.status = found ? LpStatus::Optimal : LpStatus::Infeasible;
    return best;
}

}  // namespace

BruteOutcome brute_force_lp(const LinearProgram& lp, double box) {
    const BruteOutcome a = enumerate(lp, box);
    if (a.status != LpStatus::Optimal) return a;
    const BruteOutcome b = enumerate(lp, 2.0 * box);
    if (b.objective < a.objective - 1e-6 * (1.0 + std::abs(a.objective))) return {LpStatus::Unbounded, 0.0};
    return a;
}

LinearProgram random_small_lp(std::mt19937_64& rng) {
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (;;) {
        const std::size_t n = static_cast<std::size_t>(uni(1, 5));
        const std::size_t n_eq = n > 1 ? static_cast<std::size_t>(uni(0, std::min<int>(2, static_cast<int>(n) - 1))) : 0;
        const std::size_t n_in = static_cast<std::size_t>(uni(0, 8 - static_cast<int>(n_eq)));
        LinearProgram lp(n);
        std::vector<double> anchor(n);
        for (std::size_t j = 0; j < n; ++j) {
            lp.objective[j] = uni(-5, 5);
            const int lo_kind = uni(0, 9), hi_kind = uni(0, 9);
            lp.lower[j] = lo_kind < 6 ? 0.0 : lo_kind < 8 ? -kInf : static_cast<double>(uni(-5, 0));
            lp.upper[j] = hi_kind < 4 ? kInf : static_cast<double>(uni(1, 10));
            const double lo = std::isfinite(lp.lower[j]) ? lp.lower[j] : -5.0;
            const double hi = std::isfinite(lp.upper[j]) ? lp.upper[j] : lo + 10.0;
            anchor[j] = uni(static_cast<int>(lo), static_cast<int>(hi));
        }
        const bool anchored = uni(0, 9) < 7;
        std::vector<std::vector<double>> eq_rows;
        for (std::size_t r = 0; r < n_eq; ++r) {
            std::vector<double> a(n);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                a[j] = uni(-5, 5);
                s += a[j] * anchor[j];
            }
            auto row = lp.add_equality(anchored ? s : uni(-10, 10));
            std::copy(a.begin(), a.end(), row.begin());
            eq_rows.push_back(a);
        }
        for (std::size_t r = 0; r < n_in; ++r) {
            std::vector<double> a(n);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                a[j] = uni(-5, 5);
                s += a[j] * anchor[j];
            }
            auto row = lp.add_inequality(anchored ? s + uni(0, 6) : uni(-10, 10));
            std::copy(a.begin(), a.end(), row.begin());
        }
        // Rank-deficient equality blocks have no basic solutions for the
        // enumerator to find; draw again.
        if (n_eq == 0) return lp;
        std::vector<std::vector<double>> sq;
        std::vector<double> rhs;
        bool full_rank = true;
        if (n_eq == 1) {
            full_rank = std::any_of(eq_rows[0].begin(), eq_rows[0].end(), [](double v) { return v != 0.0; });
        } else {
            full_rank = false;
            for (std::size_t p = 0; p < n && !full_rank; ++p) {
                for (std::size_t q = p + 1; q < n && !full_rank; ++q) {
                    full_rank = std::abs(eq_rows[0][p] * eq_rows[1][q] - eq_rows[0][q] * eq_rows[1][p]) > 0.5;
                }
            }
        }
        if (full_rank) return lp;
    }
}

const Trained& trained_case30() {
    static const Trained t = [] {
        Trained out;
        out.network = load_case_file(data_file("pglib_opf_case30_ieee.m"));
        const Dataset ds = generate_dataset(out.network, 3000, 11);
        out.split = split_dataset(ds, 0.8, 11);
        FfnnConfig fc;
        fc.epochs = 150;
        fc.seed = 11;
        out.ffnn = train_ffnn(out.split.train, fc);
        out.tree = train_tree(out.split.train);
        return out;
    }();
    return t;
}

}  // namespace gridcf::testing
