#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

// Dense two-phase primal simplex for the small linear programs behind the
// nodal price computation. Problems here have a few hundred columns at most.
namespace gridtrade::lp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { less_equal, equal, greater_equal };

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Row {
    std::vector<std::pair<int, double>> terms;
    Sense sense = Sense::equal;
    double rhs = 0.0;
    std::string name;
};

/// minimize cost^T x  subject to rows and lower <= x <= upper.
class LinearProgram {
public:
    int add_variable(double cost, double lower = 0.0, double upper = kInfinity);
    int add_row(std::vector<std::pair<int, double>> terms, Sense sense, double rhs, std::string name = {});

    int num_variables() const noexcept { return static_cast<int>(cost_.size()); }
    int num_rows() const noexcept { return static_cast<int>(rows_.size()); }
    const std::vector<double>& cost() const noexcept { return cost_; }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }

private:
    std::vector<double> cost_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<Row> rows_;
};

struct Solution {
    Status status = Status::iteration_limit;
    double objective = 0.0;
    std::vector<double> x;
    /// Sensitivity of the optimal objective to each row's right-hand side.
    std::vector<double> duals;
    /// On infeasibility: the row carrying the largest residual phase-one
    /// artificial, or -1 when infeasibility comes from a variable bound.
    int violated_row = -1;
};

struct SolverOptions {
    double tolerance = 1e-10;
    int max_iterations = 20000;
};

Solution solve(const LinearProgram& problem, const SolverOptions& options = {});

} // namespace gridtrade::lp
