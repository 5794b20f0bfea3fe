#ifndef CCLF_LP_HPP_
#define CCLF_LP_HPP_

#include <Eigen/Core>

#include <string>
#include <vector>

namespace cclf::lp {

enum class RowSense { LessEqual, Equal };

/// min c'x  s.t.  A x {<=,=} b,  lo <= x <= hi.
/// A is given in coordinate form; duplicate (row,col) entries are summed.
struct LinearProgram {
  int num_vars = 0;
  int num_rows = 0;
  Eigen::VectorXd c;
  std::vector<int> a_row, a_col;
  std::vector<double> a_val;
  Eigen::VectorXd b;
  std::vector<RowSense> sense;
  Eigen::VectorXd lo, hi;

  void add_entry(int row, int col, double value) {
    a_row.push_back(row);
    a_col.push_back(col);
    a_val.push_back(value);
  }
  void check_well_formed() const;  // throws Error(Numerical) on NaN / dimension mismatch
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals;          // simplex multipliers y (dObj/db); <= 0 on active <= rows
  Eigen::VectorXd reduced_costs;  // c - A'y, structural columns
  int iterations = 0;
  // Basis statuses per column (structural then slack), for warm starts:
  // 'B' basic, 'L' at lower, 'U' at upper, 'F' free at zero.
  std::vector<char> basis;
};

struct LpOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  int max_iterations = 0;      // 0 = automatic (50*(m+n)+2000)
  bool equilibrate = true;     // geometric-mean row/column scaling
  int refactor_every = 120;
  std::string dump_path;       // when nonempty, write plain-text problem dump
  const std::vector<char>* warm_basis = nullptr;  // from a previous LpSolution
};

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

void dump_lp(const LinearProgram& lp, const std::string& path);

}  // namespace cclf::lp

#endif  // CCLF_LP_HPP_
