#include "cclf/lp.hpp"

#include "cclf/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <vector>

namespace cclf::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState : char { Basic, AtLo, AtUp, FreeZero };

// Row-major so that the rank-1 basis-inverse update and BTRAN stream rows.
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Csc {
  std::vector<int> ptr, idx;
  std::vector<double> val;
  int cols = 0;

  void build(int num_rows, int num_cols, const std::vector<int>& r, const std::vector<int>& cl,
             const std::vector<double>& v) {
    (void)num_rows;
    cols = num_cols;
    std::vector<int> count(num_cols + 1, 0);
    for (int c : cl) count[c + 1]++;
    ptr.assign(num_cols + 1, 0);
    for (int c = 0; c < num_cols; ++c) ptr[c + 1] = ptr[c] + count[c + 1];
    idx.assign(ptr.back(), 0);
    val.assign(ptr.back(), 0.0);
    std::vector<int> cursor(ptr.begin(), ptr.end() - 1);
    for (std::size_t k = 0; k < cl.size(); ++k) {
      int at = cursor[cl[k]]++;
      idx[at] = r[k];
      val[at] = v[k];
    }
    // merge duplicates within each column (sorted by row first)
    for (int c = 0; c < num_cols; ++c) {
      int b = ptr[c], e = cursor[c];
      std::vector<std::pair<int, double>> ents;
      ents.reserve(e - b);
      for (int k = b; k < e; ++k) ents.emplace_back(idx[k], val[k]);
      std::sort(ents.begin(), ents.end(),
                [](const auto& a, const auto& bb) { return a.first < bb.first; });
      int w = b;
      for (std::size_t k = 0; k < ents.size(); ++k) {
        if (w > b && idx[w - 1] == ents[k].first) {
          val[w - 1] += ents[k].second;
        } else {
          idx[w] = ents[k].first;
          val[w] = ents[k].second;
          ++w;
        }
      }
      cursor[c] = w;
    }
    // compact
    std::vector<int> nidx;
    std::vector<double> nval;
    std::vector<int> nptr(num_cols + 1, 0);
    for (int c = 0; c < num_cols; ++c) {
      for (int k = ptr[c]; k < cursor[c]; ++k) {
        nidx.push_back(idx[k]);
        nval.push_back(val[k]);
      }
      nptr[c + 1] = int(nidx.size());
    }
    ptr.swap(nptr);
    idx.swap(nidx);
    val.swap(nval);
  }
};

class Simplex {
public:
  Simplex(const LinearProgram& lp, const LpOptions& opts) : opts_(opts) {
    n_ = lp.num_vars;
    m_ = lp.num_rows;
    ncols_ = n_ + m_;

    row_scale_.assign(m_, 1.0);
    col_scale_.assign(n_, 1.0);
    std::vector<double> sval = lp.a_val;
    if (opts.equilibrate) equilibrate(lp, sval);

    std::vector<int> rows = lp.a_row;
    std::vector<int> cols = lp.a_col;
    // slack columns (identity); equality rows get a fixed [0,0] slack
    for (int r = 0; r < m_; ++r) {
      rows.push_back(r);
      cols.push_back(n_ + r);
      sval.push_back(1.0);
    }
    A_.build(m_, ncols_, rows, cols, sval);

    b_.resize(m_);
    for (int r = 0; r < m_; ++r) b_[r] = lp.b[r] * row_scale_[r];

    lo_.assign(ncols_, 0.0);
    hi_.assign(ncols_, 0.0);
    cost_.assign(ncols_, 0.0);
    for (int j = 0; j < n_; ++j) {
      // magnitudes beyond 1e29 act as infinities
      lo_[j] = lp.lo[j] <= -1e29 ? -kInf : lp.lo[j] / col_scale_[j];
      hi_[j] = lp.hi[j] >= 1e29 ? kInf : lp.hi[j] / col_scale_[j];
      cost_[j] = lp.c[j] * col_scale_[j];
    }
    for (int r = 0; r < m_; ++r) {
      lo_[n_ + r] = 0.0;
      hi_[n_ + r] = (lp.sense[r] == RowSense::LessEqual) ? kInf : 0.0;
    }
  }

  LpSolution run() {
    LpSolution sol;
    int attempts = 0;
    for (;;) {
      try {
        sol = solve_once();
        break;
      } catch (const Error& e) {
        // One restart from scratch after a singular basis, then give up.
        if (++attempts > 1 || std::string(e.what()).find("basis singular") == std::string::npos)
          throw;
        force_cold_ = true;
      }
    }
    return sol;
  }

private:
  void equilibrate(const LinearProgram& lp, std::vector<double>& sval) {
    // geometric-mean scaling; near-zero entries are excluded from the minimum
    // and factors are clamped so noise entries cannot poison the scaling
    auto clamp_scale = [](double s) { return std::min(std::max(s, 1e-4), 1e4); };
    for (int pass = 0; pass < 3; ++pass) {
      std::vector<double> rmax(m_, 0.0), rmin(m_, kInf);
      for (std::size_t k = 0; k < sval.size(); ++k) {
        double a = std::abs(sval[k]);
        if (a > 0.0) rmax[lp.a_row[k]] = std::max(rmax[lp.a_row[k]], a);
      }
      for (std::size_t k = 0; k < sval.size(); ++k) {
        double a = std::abs(sval[k]);
        if (a >= 1e-8 * rmax[lp.a_row[k]] && a > 0.0)
          rmin[lp.a_row[k]] = std::min(rmin[lp.a_row[k]], a);
      }
      std::vector<double> rs(m_, 1.0);
      for (int r = 0; r < m_; ++r)
        if (rmax[r] > 0.0) rs[r] = clamp_scale(1.0 / std::sqrt(rmax[r] * rmin[r]));
      std::vector<double> cmax(n_, 0.0), cmin(n_, kInf);
      for (std::size_t k = 0; k < sval.size(); ++k) {
        double a = std::abs(sval[k]) * rs[lp.a_row[k]];
        if (a > 0.0) cmax[lp.a_col[k]] = std::max(cmax[lp.a_col[k]], a);
      }
      for (std::size_t k = 0; k < sval.size(); ++k) {
        double a = std::abs(sval[k]) * rs[lp.a_row[k]];
        if (a >= 1e-8 * cmax[lp.a_col[k]] && a > 0.0)
          cmin[lp.a_col[k]] = std::min(cmin[lp.a_col[k]], a);
      }
      std::vector<double> cs(n_, 1.0);
      for (int j = 0; j < n_; ++j)
        if (cmax[j] > 0.0) cs[j] = clamp_scale(1.0 / std::sqrt(cmax[j] * cmin[j]));
      for (std::size_t k = 0; k < sval.size(); ++k) sval[k] *= rs[lp.a_row[k]] * cs[lp.a_col[k]];
      for (int r = 0; r < m_; ++r) row_scale_[r] *= rs[r];
      for (int j = 0; j < n_; ++j) col_scale_[j] *= cs[j];
    }
  }

  bool fixed(int j) const { return lo_[j] == hi_[j]; }

  double bound_value(int j, VarState s) const {
    if (s == VarState::AtLo) return lo_[j];
    if (s == VarState::AtUp) return hi_[j];
    return 0.0;
  }

  void install_cold_basis() {
    state_.assign(ncols_, VarState::AtLo);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j]))
        state_[j] = VarState::AtLo;
      else if (std::isfinite(hi_[j]))
        state_[j] = VarState::AtUp;
      else
        state_[j] = VarState::FreeZero;
      // prefer the bound closer to zero when both are finite
      if (std::isfinite(lo_[j]) && std::isfinite(hi_[j]) && std::abs(hi_[j]) < std::abs(lo_[j]))
        state_[j] = VarState::AtUp;
    }
    basis_cols_.resize(m_);
    for (int r = 0; r < m_; ++r) {
      basis_cols_[r] = n_ + r;
      state_[n_ + r] = VarState::Basic;
    }
    binv_ = RowMajorMatrix::Identity(m_, m_);
    recompute_basics();
  }

  bool install_warm_basis(const std::vector<char>& wb) {
    if (int(wb.size()) != ncols_) return false;
    std::vector<int> bc;
    state_.assign(ncols_, VarState::AtLo);
    for (int j = 0; j < ncols_; ++j) {
      switch (wb[j]) {
        case 'B': bc.push_back(j); state_[j] = VarState::Basic; break;
        case 'U': state_[j] = std::isfinite(hi_[j]) ? VarState::AtUp : VarState::FreeZero; break;
        case 'F': state_[j] = VarState::FreeZero; break;
        default:  state_[j] = std::isfinite(lo_[j]) ? VarState::AtLo : VarState::FreeZero; break;
      }
    }
    if (int(bc.size()) != m_) return false;
    basis_cols_ = bc;
    if (!refactorize()) return false;
    recompute_basics();
    return true;
  }

  // x_B = Binv (b - sum over nonbasic columns at nonzero values)
  void recompute_basics() {
    Eigen::VectorXd r = b_;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      double v = bound_value(j, state_[j]);
      if (v == 0.0) continue;
      for (int k = A_.ptr[j]; k < A_.ptr[j + 1]; ++k) r[A_.idx[k]] -= A_.val[k] * v;
    }
    xb_ = binv_ * r;
  }

  bool refactorize() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int p = 0; p < m_; ++p) {
      int j = basis_cols_[p];
      for (int k = A_.ptr[j]; k < A_.ptr[j + 1]; ++k) B(A_.idx[k], p) = A_.val[k];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    // singularity test on the U diagonal (the determinant itself may
    // under- or overflow for large bases)
    Eigen::VectorXd udiag = lu.matrixLU().diagonal().cwiseAbs();
    double umax = udiag.maxCoeff();
    if (!(umax > 0.0) || !std::isfinite(umax)) return false;
    if (udiag.minCoeff() < 1e-13 * umax) {
      if (getenv("CCLF_LP_DEBUG"))
        std::fprintf(stderr, "[lp] refactor singular: umin=%.3e umax=%.3e m=%d\n",
                     udiag.minCoeff(), umax, m_);
      return false;
    }
    Eigen::MatrixXd inv = lu.inverse();
    if (!inv.allFinite()) return false;
    // binv maps row-space: x_B = P * inv * rhs with column permutation identity here
    // (basis_cols_[p] is basis position p, so inv rows align with positions already)
    binv_ = inv;
    return true;
  }

  // w = Binv * a_j for sparse column j, streamed row-wise for locality
  void ftran(int j, Eigen::VectorXd& w) const {
    w.setZero(m_);
    int b = A_.ptr[j], e = A_.ptr[j + 1];
    for (int i = 0; i < m_; ++i) {
      const double* row = binv_.data() + std::size_t(i) * m_;
      double acc = 0.0;
      for (int k = b; k < e; ++k) acc += row[A_.idx[k]] * A_.val[k];
      w[i] = acc;
    }
  }

  // y' = cB' Binv
  void btran(const Eigen::VectorXd& cb, Eigen::VectorXd& y) const {
    y.setZero(m_);
    for (int i = 0; i < m_; ++i) {
      double ci = cb[i];
      if (ci == 0.0) continue;
      const double* row = binv_.data() + std::size_t(i) * m_;
      for (int k = 0; k < m_; ++k) y[k] += ci * row[k];
    }
  }

  double dot_col(int j, const Eigen::VectorXd& y) const {
    double acc = 0.0;
    for (int k = A_.ptr[j]; k < A_.ptr[j + 1]; ++k) acc += y[A_.idx[k]] * A_.val[k];
    return acc;
  }

  double infeasibility() const {
    double s = 0.0;
    for (int p = 0; p < m_; ++p) {
      int j = basis_cols_[p];
      if (xb_[p] < lo_[j]) s += lo_[j] - xb_[p];
      if (xb_[p] > hi_[j]) s += xb_[p] - hi_[j];
    }
    return s;
  }

  LpSolution solve_once() {
    if (!force_cold_ && opts_.warm_basis != nullptr && install_warm_basis(*opts_.warm_basis)) {
      // warm basis installed
    } else {
      install_cold_basis();
    }

    int max_iter = opts_.max_iterations > 0 ? opts_.max_iterations : 50 * (m_ + n_) + 2000;
    double ftol = opts_.feas_tol;
    int degen_streak = 0;
    int since_refactor = 0;
    int iter = 0;
    LpStatus status = LpStatus::IterationLimit;

    Eigen::VectorXd cb(m_), y(m_), w(m_);

    while (iter < max_iter) {
      ++iter;
      bool phase1 = infeasibility() > ftol * (1.0 + b_.cwiseAbs().maxCoeff());

      // phase-1 costs push violated basics back toward their bounds
      for (int p = 0; p < m_; ++p) {
        int j = basis_cols_[p];
        if (phase1) {
          if (xb_[p] < lo_[j] - ftol)
            cb[p] = -1.0;
          else if (xb_[p] > hi_[j] + ftol)
            cb[p] = 1.0;
          else
            cb[p] = 0.0;
        } else {
          cb[p] = cost_[j];
        }
      }
      btran(cb, y);

      // pricing
      int enter = -1;
      double best = opts_.opt_tol;
      int sigma = +1;
      bool bland = degen_streak >= 12;
      for (int j = 0; j < ncols_; ++j) {
        if (state_[j] == VarState::Basic || fixed(j)) continue;
        double cj = phase1 ? 0.0 : cost_[j];
        double dj = cj - dot_col(j, y);
        int s = 0;
        if (state_[j] == VarState::AtLo && dj < -opts_.opt_tol)
          s = +1;
        else if (state_[j] == VarState::AtUp && dj > opts_.opt_tol)
          s = -1;
        else if (state_[j] == VarState::FreeZero && std::abs(dj) > opts_.opt_tol)
          s = (dj < 0.0) ? +1 : -1;
        if (s == 0) continue;
        if (bland) {
          enter = j;
          sigma = s;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          enter = j;
          sigma = s;
        }
      }

      if (enter < 0) {
        if (phase1) {
          double inf = infeasibility();
          double scale = 1.0 + b_.cwiseAbs().maxCoeff();
          if (inf <= 2e-8 * scale) {
            // roundoff-level residual infeasibility: snap and continue
            for (int p = 0; p < m_; ++p) {
              int j = basis_cols_[p];
              if (xb_[p] < lo_[j]) xb_[p] = lo_[j];
              if (xb_[p] > hi_[j]) xb_[p] = hi_[j];
            }
            continue;
          }
          status = LpStatus::Infeasible;
        } else {
          status = LpStatus::Optimal;
        }
        break;
      }

      ftran(enter, w);

      // two-pass (Harris-style) ratio test: pass 1 finds the minimum ratio
      // with bounds expanded by a feasibility tolerance, pass 2 picks the
      // largest pivot among rows blocking within that relaxed step, which
      // keeps the basis updates well conditioned under degeneracy
      const double expand = 1e-9;
      auto row_ratio = [&](int p, double slack_expand, bool* to_upper) -> double {
        int j = basis_cols_[p];
        double g = sigma * w[p];
        *to_upper = false;
        if (std::abs(g) < 1e-10) return kInf;
        if (phase1 && xb_[p] < lo_[j] - ftol) {
          // infeasible below: blocks only when moving up through its lower bound
          if (g < 0.0) return (lo_[j] - xb_[p] + slack_expand) / (-g);
          return kInf;
        }
        if (phase1 && xb_[p] > hi_[j] + ftol) {
          if (g > 0.0) {
            *to_upper = true;
            return (xb_[p] - hi_[j] + slack_expand) / g;
          }
          return kInf;
        }
        if (g > 0.0) {
          if (!std::isfinite(lo_[j])) return kInf;
          return (xb_[p] - lo_[j] + slack_expand) / g;
        }
        if (!std::isfinite(hi_[j])) return kInf;
        *to_upper = true;
        return (hi_[j] - xb_[p] + slack_expand) / (-g);
      };

      double t_relaxed = kInf;
      for (int p = 0; p < m_; ++p) {
        bool up;
        t_relaxed = std::min(t_relaxed, row_ratio(p, expand, &up));
      }
      int leave_pos = -1;
      double leave_pivot = 0.0;
      bool leave_to_upper = false;
      double t_max = kInf;
      for (int p = 0; p < m_; ++p) {
        bool up;
        double t = row_ratio(p, 0.0, &up);
        if (t > t_relaxed) continue;
        if (t < -ftol) t = 0.0;
        bool better;
        if (leave_pos < 0)
          better = true;
        else if (bland)
          better = basis_cols_[p] < basis_cols_[leave_pos];
        else
          better = std::abs(w[p]) > std::abs(leave_pivot);
        if (better) {
          leave_pos = p;
          leave_pivot = w[p];
          leave_to_upper = up;
          t_max = std::max(t, 0.0);
        }
      }
      double own_range = hi_[enter] - lo_[enter];
      bool own_flip = false;
      if (state_[enter] != VarState::FreeZero && std::isfinite(own_range) && own_range < t_max) {
        t_max = own_range;
        own_flip = true;
        leave_pos = -2;
      }

      if (!std::isfinite(t_max)) {
        if (phase1) fail(ErrorCode::Numerical, "phase-1 ray: basis singular");
        status = LpStatus::Unbounded;
        break;
      }

      if (t_max <= 1e-11)
        ++degen_streak;
      else
        degen_streak = 0;

      // apply the step
      double enter_from = bound_value(enter, state_[enter]);
      for (int p = 0; p < m_; ++p) xb_[p] -= t_max * sigma * w[p];

      if (own_flip) {
        state_[enter] = (state_[enter] == VarState::AtLo) ? VarState::AtUp : VarState::AtLo;
        continue;
      }

      // basis exchange at position leave_pos
      if (std::abs(leave_pivot) < 1e-11) {
        if (getenv("CCLF_LP_DEBUG"))
          std::fprintf(stderr, "[lp] tiny pivot %.3e at iter %d enter=%d leave_pos=%d\n",
                       leave_pivot, iter, enter, leave_pos);
        if (!refactorize()) fail(ErrorCode::Numerical, "basis singular");
        recompute_basics();
        since_refactor = 0;
        continue;  // re-price with a clean factorization
      }
      int leave_col = basis_cols_[leave_pos];
      state_[leave_col] = leave_to_upper ? VarState::AtUp : VarState::AtLo;
      if (!std::isfinite(bound_value(leave_col, state_[leave_col])))
        state_[leave_col] = VarState::FreeZero;
      basis_cols_[leave_pos] = enter;
      state_[enter] = VarState::Basic;
      xb_[leave_pos] = enter_from + sigma * t_max;

      // rank-1 update of the explicit inverse: row ops, contiguous in row-major
      {
        double piv = leave_pivot;
        double* prow = binv_.data() + std::size_t(leave_pos) * m_;
        for (int k = 0; k < m_; ++k) prow[k] /= piv;
        for (int i = 0; i < m_; ++i) {
          if (i == leave_pos) continue;
          double f = w[i];
          if (f == 0.0) continue;
          double* row = binv_.data() + std::size_t(i) * m_;
          for (int k = 0; k < m_; ++k) row[k] -= f * prow[k];
        }
      }

      bool need_refactor = ++since_refactor >= opts_.refactor_every;
      if (!need_refactor && (iter & 63) == 0) need_refactor = basics_drift() > 1e-7;
      if (need_refactor) {
        if (!refactorize()) fail(ErrorCode::Numerical, "basis singular");
        recompute_basics();
        since_refactor = 0;
      }
    }

    return extract(status, iter);
  }

  // residual of B x_B = b - A_N x_N, relative; detects inverse drift
  double basics_drift() const {
    Eigen::VectorXd r = b_;
    for (int j = 0; j < ncols_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      double v = bound_value(j, state_[j]);
      if (v == 0.0) continue;
      for (int k = A_.ptr[j]; k < A_.ptr[j + 1]; ++k) r[A_.idx[k]] -= A_.val[k] * v;
    }
    for (int p = 0; p < m_; ++p) {
      int j = basis_cols_[p];
      double v = xb_[p];
      if (v == 0.0) continue;
      for (int k = A_.ptr[j]; k < A_.ptr[j + 1]; ++k) r[A_.idx[k]] -= A_.val[k] * v;
    }
    double scale = 1.0 + b_.cwiseAbs().maxCoeff();
    return r.cwiseAbs().maxCoeff() / scale;
  }

  LpSolution extract(LpStatus status, int iter) {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iter;
    Eigen::VectorXd xfull(ncols_);
    for (int j = 0; j < ncols_; ++j) xfull[j] = bound_value(j, state_[j]);
    for (int p = 0; p < m_; ++p) xfull[basis_cols_[p]] = xb_[p];

    Eigen::VectorXd cb(m_), y(m_);
    for (int p = 0; p < m_; ++p) cb[p] = cost_[basis_cols_[p]];
    btran(cb, y);

    sol.x.resize(n_);
    for (int j = 0; j < n_; ++j) sol.x[j] = xfull[j] * col_scale_[j];
    sol.duals.resize(m_);
    for (int r = 0; r < m_; ++r) sol.duals[r] = y[r] * row_scale_[r];
    sol.reduced_costs.resize(n_);
    for (int j = 0; j < n_; ++j)
      sol.reduced_costs[j] = (cost_[j] - dot_col(j, y)) / col_scale_[j];
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += (cost_[j] / col_scale_[j]) * sol.x[j];
    sol.objective = obj;
    sol.basis.resize(ncols_);
    for (int j = 0; j < ncols_; ++j) {
      switch (state_[j]) {
        case VarState::Basic: sol.basis[j] = 'B'; break;
        case VarState::AtLo: sol.basis[j] = 'L'; break;
        case VarState::AtUp: sol.basis[j] = 'U'; break;
        case VarState::FreeZero: sol.basis[j] = 'F'; break;
      }
    }
    return sol;
  }

  LpOptions opts_;
  int n_ = 0, m_ = 0, ncols_ = 0;
  Csc A_;
  Eigen::VectorXd b_;
  std::vector<double> lo_, hi_, cost_;
  std::vector<double> row_scale_, col_scale_;
  std::vector<VarState> state_;
  std::vector<int> basis_cols_;
  Eigen::VectorXd xb_;
  RowMajorMatrix binv_;
  bool force_cold_ = false;
};

}  // namespace

void LinearProgram::check_well_formed() const {
  if (int(c.size()) != num_vars || int(lo.size()) != num_vars || int(hi.size()) != num_vars)
    fail(ErrorCode::Numerical, "lp: cost/bound dimension mismatch");
  if (int(b.size()) != num_rows || int(sense.size()) != num_rows)
    fail(ErrorCode::Numerical, "lp: rhs dimension mismatch");
  if (a_row.size() != a_col.size() || a_row.size() != a_val.size())
    fail(ErrorCode::Numerical, "lp: coordinate arrays inconsistent");
  for (double v : a_val)
    if (std::isnan(v)) fail(ErrorCode::Numerical, "lp: NaN entry in matrix");
  for (int j = 0; j < num_vars; ++j) {
    if (std::isnan(c[j]) || std::isnan(lo[j]) || std::isnan(hi[j]))
      fail(ErrorCode::Numerical, "lp: NaN entry in cost or bounds");
    if (lo[j] > hi[j]) fail(ErrorCode::Numerical, "lp: empty variable bound range");
  }
  for (int r = 0; r < num_rows; ++r)
    if (std::isnan(b[r])) fail(ErrorCode::Numerical, "lp: NaN entry in rhs");
  for (std::size_t k = 0; k < a_row.size(); ++k)
    if (a_row[k] < 0 || a_row[k] >= num_rows || a_col[k] < 0 || a_col[k] >= num_vars)
      fail(ErrorCode::Numerical, "lp: coordinate out of range");
}

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& opts) {
  lp.check_well_formed();
  if (!opts.dump_path.empty()) dump_lp(lp, opts.dump_path);
  if (lp.num_rows == 0) {
    // pure bound problem: put each variable at its cheaper bound
    LpSolution sol;
    sol.status = LpStatus::Optimal;
    sol.x.resize(lp.num_vars);
    sol.duals.resize(0);
    sol.reduced_costs = lp.c;
    sol.basis.assign(lp.num_vars, 'L');
    for (int j = 0; j < lp.num_vars; ++j) {
      if (lp.c[j] > 0.0) {
        if (!std::isfinite(lp.lo[j])) { sol.status = LpStatus::Unbounded; }
        sol.x[j] = lp.lo[j];
      } else if (lp.c[j] < 0.0) {
        if (!std::isfinite(lp.hi[j])) { sol.status = LpStatus::Unbounded; }
        sol.x[j] = lp.hi[j];
        sol.basis[j] = 'U';
      } else {
        sol.x[j] = std::isfinite(lp.lo[j]) ? lp.lo[j] : (std::isfinite(lp.hi[j]) ? lp.hi[j] : 0.0);
      }
    }
    sol.objective = sol.status == LpStatus::Optimal ? lp.c.dot(sol.x) : -kInf;
    return sol;
  }
  Simplex s(lp, opts);
  return s.run();
}

void dump_lp(const LinearProgram& lp, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Usage, "cannot open LP dump path: " + path);
  f.precision(17);
  f << "minimize\n";
  for (int j = 0; j < lp.num_vars; ++j)
    if (lp.c[j] != 0.0) f << (lp.c[j] >= 0 ? " +" : " ") << lp.c[j] << " x" << j;
  f << "\nsubject to\n";
  std::vector<std::vector<std::pair<int, double>>> rows(lp.num_rows);
  for (std::size_t k = 0; k < lp.a_row.size(); ++k)
    rows[lp.a_row[k]].push_back({lp.a_col[k], lp.a_val[k]});
  for (int r = 0; r < lp.num_rows; ++r) {
    f << " r" << r << ":";
    for (auto& [c, v] : rows[r]) f << (v >= 0 ? " +" : " ") << v << " x" << c;
    f << (lp.sense[r] == RowSense::LessEqual ? " <= " : " = ") << lp.b[r] << "\n";
  }
  f << "bounds\n";
  for (int j = 0; j < lp.num_vars; ++j)
    f << " " << lp.lo[j] << " <= x" << j << " <= " << lp.hi[j] << "\n";
  f << "end\n";
}

}  // namespace cclf::lp
