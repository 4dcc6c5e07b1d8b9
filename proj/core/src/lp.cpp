#include "gridtrade/lp.hpp"

#include "gridtrade/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridtrade::lp {

int LinearProgram::add_variable(double cost, double lower, double upper) {
    cost_.push_back(cost);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return static_cast<int>(cost_.size()) - 1;
}

int LinearProgram::add_row(std::vector<std::pair<int, double>> terms, Sense sense, double rhs,
                           std::string name) {
    for (const auto& [var, coef] : terms) {
        if (var < 0 || var >= num_variables()) {
            throw ShapeError("row '" + name + "' references unknown variable");
        }
        (void)coef;
    }
    rows_.push_back(Row{std::move(terms), sense, rhs, std::move(name)});
    return static_cast<int>(rows_.size()) - 1;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-9;

// x_orig = shift + sign * x[pos] - x[neg]
struct VarMap {
    int pos = -1;
    int neg = -1;
    double shift = 0.0;
    double sign = 1.0;
};

class Tableau {
public:
    Tableau(RowMatrix table, std::vector<int> basis, double tol)
        : t_(std::move(table)), basis_(std::move(basis)), tol_(tol) {}

    int rows() const { return static_cast<int>(t_.rows()) - 1; }
    int cols() const { return static_cast<int>(t_.cols()) - 1; }
    double& rhs(int i) { return t_(i, cols()); }
    double objective_rhs() const { return t_(t_.rows() - 1, t_.cols() - 1); }
    RowMatrix& table() { return t_; }
    std::vector<int>& basis() { return basis_; }

    void pivot(int r, int c) {
        const double p = t_(r, c);
        t_.row(r) /= p;
        for (int i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        t_(r, c) = 1.0;
        basis_[r] = c;
    }

    /// Runs simplex iterations on the current objective row. Columns flagged in
    /// `banned` never enter.
    Status iterate(const std::vector<char>& banned, int& iterations, int max_iterations) {
        const int m = rows();
        const int n = cols();
        int degenerate_run = 0;
        while (iterations < max_iterations) {
            const bool bland = degenerate_run > 50;
            int enter = -1;
            double best = -tol_;
            for (int j = 0; j < n; ++j) {
                if (banned[j]) continue;
                const double d = t_(m, j);
                if (d < best) {
                    enter = j;
                    best = d;
                    if (bland) break;
                }
            }
            if (enter < 0) return Status::optimal;

            // Two-pass (Harris) ratio test: find the step allowed when every
            // basic level may go slightly negative, then take the largest
            // pivot among rows that block within that step.
            double theta = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                const double a = t_(i, enter);
                if (a <= kPivotTol) continue;
                theta = std::min(theta, (std::max(0.0, t_(i, n)) + kFeasTol) / a);
            }
            if (!std::isfinite(theta)) return Status::unbounded;
            int leave = -1;
            double best_ratio = 0.0;
            for (int i = 0; i < m; ++i) {
                const double a = t_(i, enter);
                if (a <= kPivotTol) continue;
                const double ratio = std::max(0.0, t_(i, n)) / a;
                if (ratio > theta) continue;
                const bool better = bland ? (leave < 0 || basis_[i] < basis_[leave])
                                          : (leave < 0 || a > t_(leave, enter));
                if (better) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            degenerate_run = best_ratio <= tol_ ? degenerate_run + 1 : 0;
            pivot(leave, enter);
            ++iterations;
        }
        return Status::iteration_limit;
    }

    void load_objective(const Eigen::VectorXd& cost) {
        const int m = rows();
        auto z = t_.row(m);
        z.setZero();
        z.head(cols()) = cost.transpose();
        for (int i = 0; i < m; ++i) {
            const double cb = cost(basis_[i]);
            if (cb != 0.0) z -= cb * t_.row(i);
        }
    }

private:
    RowMatrix t_;
    std::vector<int> basis_;
    double tol_;
};

} // namespace

Solution solve(const LinearProgram& problem, const SolverOptions& options) {
    const double tol = options.tolerance;
    Solution sol;
    const int nv = problem.num_variables();

    // Column layout: structural columns first, then slacks, then artificials.
    std::vector<VarMap> vars(nv);
    int ncols = 0;
    struct StdRow {
        std::vector<std::pair<int, double>> terms;
        Sense sense;
        double rhs;
    };
    std::vector<StdRow> std_rows;
    std::vector<StdRow> bound_rows;
    for (int j = 0; j < nv; ++j) {
        const double lo = problem.lower()[j];
        const double hi = problem.upper()[j];
        if (std::isfinite(lo) && std::isfinite(hi) && hi < lo) {
            sol.status = Status::infeasible;
            return sol;
        }
        VarMap& v = vars[j];
        if (std::isfinite(lo)) {
            v.shift = lo;
            v.pos = ncols++;
            if (std::isfinite(hi)) bound_rows.push_back({{{v.pos, 1.0}}, Sense::less_equal, hi - lo});
        } else if (std::isfinite(hi)) {
            v.shift = hi;
            v.sign = -1.0;
            v.pos = ncols++;
        } else {
            v.pos = ncols++;
            v.neg = ncols++;
        }
    }

    for (const Row& row : problem.rows()) {
        StdRow r{{}, row.sense, row.rhs};
        for (const auto& [j, a] : row.terms) {
            const VarMap& v = vars[j];
            r.rhs -= a * v.shift;
            r.terms.emplace_back(v.pos, a * v.sign);
            if (v.neg >= 0) r.terms.emplace_back(v.neg, -a);
        }
        std_rows.push_back(std::move(r));
    }
    const int n_orig_rows = static_cast<int>(std_rows.size());
    for (auto& br : bound_rows) std_rows.push_back(std::move(br));
    const int m = static_cast<int>(std_rows.size());

    std::vector<int> slack_col(m, -1);
    for (int i = 0; i < m; ++i) {
        if (std_rows[i].sense != Sense::equal) slack_col[i] = ncols++;
    }
    const int n_without_art = ncols;

    std::vector<double> row_sign(m, 1.0);
    std::vector<int> basis(m, -1);
    std::vector<int> art_col(m, -1);
    for (int i = 0; i < m; ++i) {
        double slack_coef = 0.0;
        if (std_rows[i].sense == Sense::less_equal) slack_coef = 1.0;
        if (std_rows[i].sense == Sense::greater_equal) slack_coef = -1.0;
        if (std_rows[i].rhs < 0.0) row_sign[i] = -1.0;
        if (slack_coef * row_sign[i] > 0.0) {
            basis[i] = slack_col[i];
        } else {
            art_col[i] = ncols++;
            basis[i] = art_col[i];
        }
    }

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, ncols);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        const double s = row_sign[i];
        for (const auto& [col, coef] : std_rows[i].terms) a(i, col) += s * coef;
        if (slack_col[i] >= 0) {
            a(i, slack_col[i]) = s * (std_rows[i].sense == Sense::less_equal ? 1.0 : -1.0);
        }
        if (art_col[i] >= 0) a(i, art_col[i]) = 1.0;
        b(i) = s * std_rows[i].rhs;
    }

    RowMatrix table(m + 1, ncols + 1);
    table.topLeftCorner(m, ncols) = a;
    table.topRightCorner(m, 1) = b;
    table.row(m).setZero();
    Tableau tab(std::move(table), basis, tol);

    int iterations = 0;
    std::vector<char> banned(ncols, 0);
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());

    // Phase one: drive artificials to zero.
    if (ncols > n_without_art) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(ncols);
        for (int i = 0; i < m; ++i) {
            if (art_col[i] >= 0) phase1(art_col[i]) = 1.0;
        }
        tab.load_objective(phase1);
        const Status st = tab.iterate(banned, iterations, options.max_iterations);
        if (st == Status::iteration_limit) {
            sol.status = st;
            return sol;
        }
        // The objective row drifts over many pivots; the basic artificial
        // levels are the reliable measure of infeasibility.
        double residual = 0.0;
        for (int i = 0; i < m; ++i) {
            if (tab.basis()[i] >= n_without_art) residual += std::max(0.0, tab.rhs(i));
        }
        if (residual > 1e-9 * scale) {
            sol.status = Status::infeasible;
            double worst = 0.0;
            for (int i = 0; i < m; ++i) {
                const int col = tab.basis()[i];
                if (col >= n_without_art && tab.rhs(i) > worst) {
                    worst = tab.rhs(i);
                    for (int k = 0; k < m; ++k) {
                        if (art_col[k] == col) sol.violated_row = k < n_orig_rows ? k : -1;
                    }
                }
            }
            return sol;
        }
    }

    // Pivot remaining zero-level artificials out; rows where that is
    // impossible are linearly dependent and get dropped.
    std::vector<char> redundant(m, 0);
    for (int i = 0; i < m; ++i) {
        if (tab.basis()[i] < n_without_art) continue;
        int col = -1;
        double best = 1e-9;
        for (int j = 0; j < n_without_art; ++j) {
            const double v = std::abs(tab.table()(i, j));
            if (v > best) {
                best = v;
                col = j;
            }
        }
        if (col >= 0) {
            tab.pivot(i, col);
        } else {
            redundant[i] = 1;
        }
    }
    for (int j = n_without_art; j < ncols; ++j) banned[j] = 1;

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(ncols);
    for (int j = 0; j < nv; ++j) {
        const VarMap& v = vars[j];
        cost(v.pos) += problem.cost()[j] * v.sign;
        if (v.neg >= 0) cost(v.neg) -= problem.cost()[j];
    }
    tab.load_objective(cost);
    const Status st = tab.iterate(banned, iterations, options.max_iterations);
    if (st != Status::optimal) {
        sol.status = st;
        return sol;
    }

    std::vector<int> kept;
    for (int i = 0; i < m; ++i) {
        if (!redundant[i]) kept.push_back(i);
    }
    const int k = static_cast<int>(kept.size());
    Eigen::MatrixXd basis_matrix(k, k);
    Eigen::VectorXd cb(k);
    Eigen::VectorXd b_kept(k);
    for (int c = 0; c < k; ++c) {
        const int col = tab.basis()[kept[c]];
        cb(c) = cost(col);
        b_kept(c) = b(kept[c]);
        for (int r = 0; r < k; ++r) basis_matrix(r, c) = a(kept[r], col);
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_matrix);

    // basic levels from the original data rather than the pivoted tableau
    const Eigen::VectorXd x_basic = lu.solve(b_kept);
    Eigen::VectorXd x_std = Eigen::VectorXd::Zero(ncols);
    for (int c = 0; c < k; ++c) x_std(tab.basis()[kept[c]]) = std::max(0.0, x_basic(c));

    sol.status = Status::optimal;
    sol.x.resize(nv);
    sol.objective = 0.0;
    for (int j = 0; j < nv; ++j) {
        const VarMap& v = vars[j];
        double value = v.shift + v.sign * x_std(v.pos);
        if (v.neg >= 0) value -= x_std(v.neg);
        sol.x[j] = value;
        sol.objective += problem.cost()[j] * value;
    }

    // Duals from B^T y = c_B over the rows that survived.
    const Eigen::VectorXd y = lu.transpose().solve(cb);
    sol.duals.assign(n_orig_rows, 0.0);
    for (int r = 0; r < k; ++r) {
        if (kept[r] < n_orig_rows) sol.duals[kept[r]] = row_sign[kept[r]] * y(r);
    }
    return sol;
}

} // namespace gridtrade::lp
