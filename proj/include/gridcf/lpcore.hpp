#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridcf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Row-major dense matrix that grows one row at a time.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    // Appends a zero row and returns it; the first append on an empty matrix
    // fixes the column count.
    std::span<double> append_row(std::size_t cols);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// minimize c'x  s.t.  Aeq x = beq,  Ain x <= bin,  lower <= x <= upper.
// Bounds may be infinite.
struct LinearProgram {
    std::vector<double> objective;
    DenseMatrix eq_matrix;
    std::vector<double> eq_rhs;
    DenseMatrix ineq_matrix;
    std::vector<double> ineq_rhs;
    std::vector<double> lower;
    std::vector<double> upper;

    explicit LinearProgram(std::size_t num_vars = 0)
        : objective(num_vars, 0.0), lower(num_vars, 0.0), upper(num_vars, kInf) {}

    std::size_t num_vars() const { return objective.size(); }
    std::span<double> add_equality(double rhs);
    std::span<double> add_inequality(double rhs);
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string to_string(LpStatus s);

struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    std::optional<std::vector<double>> solution;
    std::optional<double> objective_value;
    std::size_t iterations = 0;
    // Largest constraint or bound violation of `solution` on the input LP.
    double max_violation = 0.0;
};

struct LpOptions {
    // 0 selects the default budget of 50 * (rows + cols).
    std::size_t pivot_budget = 0;
    double feasibility_tol = 1e-7;
    double optimality_tol = 1e-9;
    std::size_t bland_after = 1000;
    // Stop after phase 1: Optimal then means "a feasible point was found" and
    // objective_value is 0.
    bool phase1_only = false;
};

// Throws DimensionError on malformed input and IterationLimit when the pivot
// budget runs out.
LpOutcome solve_lp(const LinearProgram& lp, const LpOptions& options = {});

}  // namespace gridcf
