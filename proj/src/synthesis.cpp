#include "cclf/synthesis.hpp"

#include "cclf/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cclf::synthesis {

namespace {

double norm_power(double sq, double expo, double smooth) {
  // ||D||^expo written as (||D||^2 + eps)^(expo/2); eps > 0 only for expo < 2
  return std::pow(sq + smooth, 0.5 * expo);
}

}  // namespace

SynthesisProblem::SynthesisProblem(const geometry::Template& t, const model::SystemModel& m,
                                   ObjectiveMode mode, double omega)
    : t_(&t), m_(&m), mode_(mode), omega_(omega) {
  if (t.n_x != m.n_x) fail(ErrorCode::Usage, "template/model dimension mismatch");
  lay_.v = t.num_vertices();
  lay_.f = t.f();
  lay_.n_u = m.n_u;

  Eigen::MatrixXd G = t.facet_matrix().leftCols(t.n_x);
  g_ = model::row_gain(G);
  wbar_ = model::support_W(G, m.W);

  // d_max = 10 * max sampled stage cost, keeps stage-1 subproblems bounded
  double lmax = 0.0;
  Eigen::VectorXd xlo = m.X.bounding_box_lo(m.n_x), xhi = m.X.bounding_box_hi(m.n_x);
  int accepted = 0;
  for (int i = 1; accepted < 1000 && i < 50000; ++i) {
    Eigen::VectorXd h = model::halton_point(i, m.n_x + m.n_u);
    Eigen::VectorXd x(m.n_x), u(m.n_u);
    for (int k = 0; k < m.n_x; ++k) x[k] = xlo[k] + (xhi[k] - xlo[k]) * h[k];
    for (int k = 0; k < m.n_u; ++k) u[k] = m.U.lo[k] + (m.U.hi[k] - m.U.lo[k]) * h[m.n_x + k];
    if (!m.X.contains(x)) continue;
    ++accepted;
    lmax = std::max(lmax, m.stage_cost(x, u));
  }
  // floor keeps transient positive drift reachable for zero-cost models
  d_max_ = std::max(10.0 * lmax, 1.0);

  norm_smooth_ = (m.alpha < 2.0 || m.beta < 2.0) ? 1e-9 : 0.0;

  // row catalogue
  int v = lay_.v, f = lay_.f;
  for (int i = 0; i < v; ++i) {
    rows_.push_back({Family::Cost, i, -1});
    for (int j = 0; j < f; ++j) rows_.push_back({Family::Invariance, i, j});
    if (m.gamma > 0.0) {
      for (int j : t.adjacency[i]) rows_.push_back({Family::Lambda, i, j});
    } else {
      rows_.push_back({Family::Lambda, i, -1});
    }
    if (m.sigma > 0.0) {
      for (int j : t.adjacency[i]) rows_.push_back({Family::Kappa, i, j});
    } else {
      rows_.push_back({Family::Kappa, i, -1});
    }
    for (int r = 0; r < m.X.num_constraints(); ++r) rows_.push_back({Family::StateSet, i, r});
    for (int k = 0; k < m.n_u; ++k) {
      rows_.push_back({Family::ControlSet, i, 2 * k});
      rows_.push_back({Family::ControlSet, i, 2 * k + 1});
    }
  }
  for (int r = 0; r < t.e_rows; ++r) rows_.push_back({Family::Edge, -1, r});

  var_lo = Eigen::VectorXd::Constant(lay_.size(), -1e30);
  var_hi = Eigen::VectorXd::Constant(lay_.size(), 1e30);
  var_hi[lay_.d()] = d_max_;
}

long SynthesisProblem::nominal_constraint_count() const {
  return long(lay_.v) * (3 + lay_.f + m_->X.num_constraints() + m_->num_u_constraints()) +
         t_->e_rows;
}

double SynthesisProblem::objective(const Eigen::VectorXd& x) const {
  double zsum = 0.0;
  for (int j = 0; j < t_->f1; ++j) zsum += x[lay_.z(j)];
  switch (mode_) {
    case ObjectiveMode::Drift: return x[lay_.d()];
    case ObjectiveMode::Domain: return -zsum;
    case ObjectiveMode::Combined: return x[lay_.d()] - omega_ * zsum;
  }
  return 0.0;
}

Eigen::VectorXd SynthesisProblem::objective_gradient() const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(lay_.size());
  if (mode_ == ObjectiveMode::Drift || mode_ == ObjectiveMode::Combined) grad[lay_.d()] = 1.0;
  if (mode_ == ObjectiveMode::Domain || mode_ == ObjectiveMode::Combined) {
    double w = mode_ == ObjectiveMode::Domain ? -1.0 : -omega_;
    for (int j = 0; j < t_->f1; ++j) grad[lay_.z(j)] = w;
  }
  return grad;
}

void SynthesisProblem::fix_domain_offsets(const Eigen::VectorXd& z1) {
  if (int(z1.size()) != t_->f1) fail(ErrorCode::Usage, "fix_domain_offsets: length mismatch");
  for (int j = 0; j < t_->f1; ++j) {
    var_lo[lay_.z(j)] = z1[j];
    var_hi[lay_.z(j)] = z1[j];
  }
}

void SynthesisProblem::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* residuals,
                                std::vector<JacEntry>* jac) const {
  const auto& t = *t_;
  const auto& m = *m_;
  const int v = lay_.v, f = lay_.f, n_x = m.n_x, n_u = m.n_u, n = n_x + 1;

  Eigen::VectorXd z(f);
  for (int j = 0; j < f; ++j) z[j] = x[lay_.z(j)];

  // per-vertex caches
  std::vector<Eigen::VectorXd> xs(v), fs(v), us(v), dLx(v), dLu(v);
  std::vector<double> heights(v), Ls(v);
  std::vector<Eigen::MatrixXd> Fx(v), Fu(v), Mz(v);  // Mz = dfdx * dvertex/dz_active
  for (int i = 0; i < v; ++i) {
    const auto& vm = t.vertex_maps[i];
    Eigen::VectorXd p = vm.point(z);
    xs[i] = p.head(n_x);
    heights[i] = p[n_x];
    us[i] = Eigen::VectorXd(n_u);
    for (int k = 0; k < n_u; ++k) us[i][k] = x[lay_.u(i, k)];
    fs[i] = m.step(xs[i], us[i]);
    m.step_jacobians(xs[i], us[i], &Fx[i], &Fu[i]);
    Ls[i] = m.stage_cost(xs[i], us[i]);
    m.stage_cost_gradients(xs[i], us[i], &dLx[i], &dLu[i]);
    Mz[i] = Fx[i] * vm.inv.topRows(n_x);  // n_x x n, columns follow active set
  }

  Eigen::MatrixXd Gs = t.facet_matrix().leftCols(n_x);  // state parts of facet rows
  Eigen::VectorXd hcol = Eigen::VectorXd::Zero(f);
  for (int j = 0; j < t.f2; ++j) hcol[t.f1 + j] = t.h2[j];

  residuals->resize(int(rows_.size()));
  if (jac) {
    jac->clear();
    jac->reserve(rows_.size() * std::size_t(n + 5));
  }
  auto push = [&](int r, int c, double val) {
    if (std::abs(val) > 1e-13 && jac) jac->push_back({r, c, val});
  };

  for (int r = 0; r < int(rows_.size()); ++r) {
    const RowInfo& ri = rows_[r];
    const int i = ri.vertex;
    switch (ri.family) {
      case Family::Cost: {
        const auto& vm = t.vertex_maps[i];
        (*residuals)[r] = Ls[i] + x[lay_.kap(i)] - x[lay_.d()] + x[lay_.y(i)] - heights[i];
        if (jac) {
          // z columns: dL/dx * dvertex/dz - s_i
          Eigen::RowVectorXd zrow =
              dLx[i].transpose() * vm.inv.topRows(n_x) - vm.inv.row(n_x);
          for (int k = 0; k < n; ++k) push(r, lay_.z(vm.active[k]), zrow[k]);
          for (int k = 0; k < n_u; ++k) push(r, lay_.u(i, k), dLu[i][k]);
          push(r, lay_.kap(i), 1.0);
          push(r, lay_.d(), -1.0);
          push(r, lay_.y(i), 1.0);
        }
        break;
      }
      case Family::Invariance: {
        const auto& vm = t.vertex_maps[i];
        const int j = ri.aux;
        double gf = Gs.row(j).dot(fs[i]);
        (*residuals)[r] =
            gf + hcol[j] * x[lay_.y(i)] + wbar_[j] + x[lay_.lam(i)] * g_[j] - z[j];
        if (jac) {
          Eigen::RowVectorXd zrow = Gs.row(j) * Mz[i];  // 1 x n on active columns
          for (int k = 0; k < n; ++k) {
            double val = zrow[k];
            if (vm.active[k] == j) val -= 1.0;
            push(r, lay_.z(vm.active[k]), val);
          }
          bool j_active = std::binary_search(vm.active.begin(), vm.active.end(), j);
          if (!j_active) push(r, lay_.z(j), -1.0);
          Eigen::RowVectorXd urow = Gs.row(j) * Fu[i];
          for (int k = 0; k < n_u; ++k) push(r, lay_.u(i, k), urow[k]);
          if (hcol[j] != 0.0) push(r, lay_.y(i), hcol[j]);
          if (g_[j] != 0.0) push(r, lay_.lam(i), g_[j]);
        }
        break;
      }
      case Family::Lambda:
      case Family::Kappa: {
        const bool is_lambda = ri.family == Family::Lambda;
        const double coef = is_lambda ? m.gamma : m.sigma;
        const double expo = is_lambda ? m.alpha : m.beta;
        const int own_col = is_lambda ? lay_.lam(i) : lay_.kap(i);
        if (ri.aux < 0) {  // coefficient zero: row collapses to -var <= 0
          (*residuals)[r] = -x[own_col];
          push(r, own_col, -1.0);
          break;
        }
        const int j = ri.aux;
        const auto& vmi = t.vertex_maps[i];
        const auto& vmj = t.vertex_maps[j];
        Eigen::VectorXd dx = xs[i] - xs[j];
        Eigen::VectorXd du = us[i] - us[j];
        double sq = dx.squaredNorm() + du.squaredNorm();
        (*residuals)[r] = coef * norm_power(sq, expo, norm_smooth_) - x[own_col];
        if (jac) {
          double outer = coef * expo * std::pow(sq + norm_smooth_, 0.5 * expo - 1.0);
          // d/dz through both vertex maps
          Eigen::RowVectorXd zi = (outer * dx).transpose() * vmi.inv.topRows(n_x);
          Eigen::RowVectorXd zj = (-outer * dx).transpose() * vmj.inv.topRows(n_x);
          for (int k = 0; k < n; ++k) push(r, lay_.z(vmi.active[k]), zi[k]);
          for (int k = 0; k < n; ++k) push(r, lay_.z(vmj.active[k]), zj[k]);
          for (int k = 0; k < n_u; ++k) {
            push(r, lay_.u(i, k), outer * du[k]);
            push(r, lay_.u(j, k), -outer * du[k]);
          }
          push(r, own_col, -1.0);
        }
        break;
      }
      case Family::StateSet: {
        const auto& vm = t.vertex_maps[i];
        if (m.X.is_ball) {
          (*residuals)[r] = xs[i].squaredNorm() - m.X.radius * m.X.radius;
          if (jac) {
            Eigen::RowVectorXd zrow = (2.0 * xs[i]).transpose() * vm.inv.topRows(n_x);
            for (int k = 0; k < n; ++k) push(r, lay_.z(vm.active[k]), zrow[k]);
          }
        } else {
          (*residuals)[r] = m.X.A.row(ri.aux).dot(xs[i]) - m.X.b[ri.aux];
          if (jac) {
            Eigen::RowVectorXd zrow = m.X.A.row(ri.aux) * vm.inv.topRows(n_x);
            for (int k = 0; k < n; ++k) push(r, lay_.z(vm.active[k]), zrow[k]);
          }
        }
        break;
      }
      case Family::ControlSet: {
        int k = ri.aux / 2;
        if (ri.aux % 2 == 0) {
          (*residuals)[r] = x[lay_.u(i, k)] - m.U.hi[k];
          push(r, lay_.u(i, k), 1.0);
        } else {
          (*residuals)[r] = m.U.lo[k] - x[lay_.u(i, k)];
          push(r, lay_.u(i, k), -1.0);
        }
        break;
      }
      case Family::Edge: {
        (*residuals)[r] = 0.0;  // accumulated below
        break;
      }
    }
  }
  // edge rows accumulated from the stored triplets in one pass
  int edge_base = int(rows_.size()) - t.e_rows;
  for (const auto& e : t.edges) {
    (*residuals)[edge_base + e.row] += e.value * z[e.col];
    push(edge_base + e.row, lay_.z(e.col), e.value);
  }
}

Eigen::VectorXd CLFArtifact::pack(const VariableLayout& lay) const {
  Eigen::VectorXd x(lay.size());
  x[lay.d()] = d;
  for (int i = 0; i < lay.v; ++i)
    for (int k = 0; k < lay.n_u; ++k) x[lay.u(i, k)] = u(i, k);
  for (int i = 0; i < lay.v; ++i) x[lay.y(i)] = y[i];
  for (int j = 0; j < lay.f; ++j) x[lay.z(j)] = z[j];
  for (int i = 0; i < lay.v; ++i) x[lay.lam(i)] = lambda[i];
  for (int i = 0; i < lay.v; ++i) x[lay.kap(i)] = kappa[i];
  return x;
}

CLFArtifact CLFArtifact::unpack(const VariableLayout& lay, const Eigen::VectorXd& x) {
  CLFArtifact a;
  a.d = x[lay.d()];
  a.u.resize(lay.v, lay.n_u);
  for (int i = 0; i < lay.v; ++i)
    for (int k = 0; k < lay.n_u; ++k) a.u(i, k) = x[lay.u(i, k)];
  a.y.resize(lay.v);
  a.lambda.resize(lay.v);
  a.kappa.resize(lay.v);
  for (int i = 0; i < lay.v; ++i) {
    a.y[i] = x[lay.y(i)];
    a.lambda[i] = x[lay.lam(i)];
    a.kappa[i] = x[lay.kap(i)];
  }
  a.z.resize(lay.f);
  for (int j = 0; j < lay.f; ++j) a.z[j] = x[lay.z(j)];
  return a;
}

ResidualReport residual_report(const SynthesisProblem& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd r;
  p.evaluate(x, &r, nullptr);
  ResidualReport rep;
  const auto& info = p.row_info();
  for (int k = 0; k < r.size(); ++k) {
    double val = r[k];
    switch (info[k].family) {
      case Family::Cost: rep.cost = std::max(rep.cost, val); break;
      case Family::Invariance: rep.invariance = std::max(rep.invariance, val); break;
      case Family::Lambda: rep.lambda = std::max(rep.lambda, val); break;
      case Family::Kappa: rep.kappa = std::max(rep.kappa, val); break;
      case Family::StateSet: rep.state_set = std::max(rep.state_set, val); break;
      case Family::ControlSet: rep.control_set = std::max(rep.control_set, val); break;
      case Family::Edge: rep.edge = std::max(rep.edge, val); break;
    }
    rep.overall = std::max(rep.overall, val);
  }
  return rep;
}

Eigen::VectorXd initial_guess(const SynthesisProblem& p, double shrink) {
  const auto& t = p.templ();
  const auto& m = p.model();
  const auto& lay = p.layout();
  if (!(shrink > 0.0 && shrink <= 1.0)) fail(ErrorCode::Usage, "shrink must lie in (0, 1]");

  // scale the interior reference configuration until all vertices are in X
  double s = shrink;
  bool fits = false;
  for (; s > 1e-3; s *= 0.7) {
    fits = true;
    for (const auto& vm : t.vertex_maps) {
      Eigen::VectorXd xi = vm.state(t.z_int) * s;
      if (!m.X.contains(xi, -1e-9)) {
        fits = false;
        break;
      }
    }
    if (fits) break;
  }
  if (!fits) fail(ErrorCode::Numerical, "domain infeasible");
  if (s != shrink && s > 0.0)
    std::fprintf(stderr, "[synthesis] initial guess: shrink reduced to %.4f\n", s);

  Eigen::VectorXd z = s * t.z_int;
  int v = lay.v, n_u = lay.n_u;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.size());
  for (int j = 0; j < lay.f; ++j) x[lay.z(j)] = z[j];

  Eigen::VectorXd u0 = m.U.clamp(Eigen::VectorXd::Zero(n_u));
  std::vector<Eigen::VectorXd> xs(v);
  for (int i = 0; i < v; ++i) {
    xs[i] = t.vertex_maps[i].state(z);
    for (int k = 0; k < n_u; ++k) x[lay.u(i, k)] = u0[k];
  }

  double smooth = (m.alpha < 2.0 || m.beta < 2.0) ? 1e-9 : 0.0;
  Eigen::MatrixXd Gs = t.facet_matrix().leftCols(m.n_x);
  const Eigen::VectorXd& g = p.row_gains();
  const Eigen::VectorXd& wbar = p.disturbance_support();

  double dmax_needed = -1e30;
  for (int i = 0; i < v; ++i) {
    double pairmax = 0.0;
    for (int j : t.adjacency[i]) {
      double sq = (xs[i] - xs[j]).squaredNorm();
      pairmax = std::max(pairmax, sq);
    }
    double lam = m.gamma * norm_power(pairmax, m.alpha, smooth);
    double kap = m.sigma * norm_power(pairmax, m.beta, smooth);
    x[lay.lam(i)] = lam;
    x[lay.kap(i)] = kap;

    // smallest y_i satisfying the lower invariance rows at fixed z, u
    Eigen::VectorXd fi = m.step(xs[i], u0);
    double y = -1e30;
    for (int j = 0; j < t.f2; ++j) {
      int row = t.f1 + j;
      double val = (Gs.row(row).dot(fi) + wbar[row] + lam * g[row] - z[row]) / (-t.h2[j]);
      y = std::max(y, val);
    }
    x[lay.y(i)] = y;
    double hi = t.vertex_maps[i].height(z);
    dmax_needed = std::max(dmax_needed, m.stage_cost(xs[i], u0) + kap - hi + y);
  }
  x[lay.d()] = std::min(dmax_needed, p.d_max());
  return x;
}

namespace {

struct SubproblemResult {
  Eigen::VectorXd step;
  double lin_violation = 0.0;
  double pred_merit = 0.0;
};

// The trust-region l1-penalty LP  min g'dx + P sum max(0, c + A dx) over a box
// is solved in its dual form: the basis then has one row per NLP variable
// instead of one per constraint, which keeps paper-scale subproblems cheap.
SubproblemResult solve_subproblem(const SynthesisProblem& p, const Eigen::VectorXd& grad,
                                  const Eigen::VectorXd& resid,
                                  const std::vector<JacEntry>& jac, const Eigen::VectorXd& x,
                                  double penalty, double radius, const std::string& dump_path,
                                  std::vector<char>* warm) {
  const int n = p.num_vars();
  const int mrows = int(resid.size());

  Eigen::VectorXd dlo(n), dhi(n);
  for (int k = 0; k < n; ++k) {
    dlo[k] = std::max(-radius, p.var_lo[k] - x[k]);
    dhi[k] = std::min(radius, p.var_hi[k] - x[k]);
    if (dlo[k] > dhi[k]) {  // x pinned outside its box by rounding
      dlo[k] = std::min(dlo[k], 0.0);
      dhi[k] = std::max(dhi[k], 0.0);
    }
  }

  lp::LinearProgram d;
  d.num_vars = mrows + 2 * n;
  d.num_rows = n;
  d.c.resize(d.num_vars);
  d.lo.resize(d.num_vars);
  d.hi.resize(d.num_vars);
  for (int r = 0; r < mrows; ++r) {
    d.c[r] = -resid[r];
    d.lo[r] = 0.0;
    d.hi[r] = penalty;
  }
  for (int k = 0; k < n; ++k) {
    d.c[mrows + k] = -dlo[k];
    d.lo[mrows + k] = 0.0;
    d.hi[mrows + k] = 1e30;
    d.c[mrows + n + k] = dhi[k];
    d.lo[mrows + n + k] = 0.0;
    d.hi[mrows + n + k] = 1e30;
  }
  d.b = -grad;
  d.sense.assign(n, lp::RowSense::Equal);
  for (const auto& e : jac) d.add_entry(e.col, e.row, e.value);
  for (int k = 0; k < n; ++k) {
    d.add_entry(k, mrows + k, -1.0);
    d.add_entry(k, mrows + n + k, 1.0);
  }

  lp::LpOptions opts;
  opts.dump_path = dump_path;
  opts.refactor_every = 400;
  if (warm && int(warm->size()) == d.num_vars + d.num_rows) opts.warm_basis = warm;
  auto sol = lp::solve_lp(d, opts);
  if (sol.status != lp::LpStatus::Optimal) {
    if (getenv("CCLF_LP_DEBUG"))
      std::fprintf(stderr, "[slp] subproblem status=%d iters=%d\n", int(sol.status),
                   sol.iterations);
    fail(ErrorCode::Numerical, "restoration failed: penalty subproblem not optimal");
  }
  if (warm) *warm = sol.basis;

  SubproblemResult out;
  out.step = sol.duals;  // duals of the equality rows are the primal step
  for (int k = 0; k < n; ++k)
    out.step[k] = std::min(std::max(out.step[k], dlo[k]), dhi[k]);

  // linearized residuals at the step
  Eigen::VectorXd lin = resid;
  for (const auto& e : jac) lin[e.row] += e.value * out.step[e.col];
  out.lin_violation = 0.0;
  for (int r = 0; r < mrows; ++r) out.lin_violation += std::max(0.0, lin[r]);
  out.pred_merit = grad.dot(out.step) + penalty * out.lin_violation;
  return out;
}

double total_violation(const Eigen::VectorXd& resid) {
  double s = 0.0;
  for (int r = 0; r < resid.size(); ++r) s += std::max(0.0, resid[r]);
  return s;
}

}  // namespace

SubproblemStep slp_subproblem(const SynthesisProblem& p, const Eigen::VectorXd& x,
                              double penalty, double radius) {
  Eigen::VectorXd resid;
  std::vector<JacEntry> jac;
  p.evaluate(x, &resid, &jac);
  auto sub = solve_subproblem(p, p.objective_gradient(), resid, jac, x, penalty, radius, {},
                              nullptr);
  SubproblemStep out;
  out.step = sub.step;
  out.predicted_merit = sub.pred_merit;
  out.linearized_violation = sub.lin_violation;
  return out;
}

CLFArtifact solve_slp(SynthesisProblem& p, const Eigen::VectorXd& start,
                      const SynthesisOptions& o) {
  const int n = p.num_vars();
  Eigen::VectorXd x = start;
  for (int k = 0; k < n; ++k) x[k] = std::min(std::max(x[k], p.var_lo[k]), p.var_hi[k]);

  Eigen::VectorXd grad = p.objective_gradient();
  Eigen::VectorXd resid;
  std::vector<JacEntry> jac;
  p.evaluate(x, &resid, &jac);
  if (!resid.allFinite()) fail(ErrorCode::Numerical, "start has non-finite residuals");

  double penalty = o.penalty_init;
  double radius = std::min(std::max(0.1 * start.cwiseAbs().maxCoeff() + 0.1, o.tr_min), o.tr_max);
  double viol = total_violation(resid);
  double merit = p.objective(x) + penalty * viol;

  SolveTrace trace;
  trace.merit_history.push_back(merit);
  std::vector<char> warm;
  Eigen::VectorXd best_x = x;
  double best_viol = viol;

  std::vector<double> viol_window;
  bool converged = false;
  double last_step_norm = 0.0;

  int iter = 0;
  while (iter < o.max_iterations) {
    ++iter;
    auto sub = solve_subproblem(p, grad, resid, jac, x, penalty, radius, o.lp_dump_path, &warm);
    double step_norm = sub.step.cwiseAbs().maxCoeff();
    last_step_norm = step_norm;
    double pred_decrease = merit - (p.objective(x) + sub.pred_merit);

    // the linearization itself cannot reach feasibility: raise the penalty
    if (sub.lin_violation > std::max(o.tol_feas, 0.5 * viol) && penalty < o.penalty_cap) {
      penalty = std::min(penalty * 10.0, o.penalty_cap);
      merit = p.objective(x) + penalty * viol;
      continue;
    }

    if (step_norm <= o.tol_step) {
      if (viol <= o.tol_feas) {
        converged = true;
        trace.status = "converged: step below tolerance";
        break;
      }
      if (penalty < o.penalty_cap) {
        penalty = std::min(penalty * 10.0, o.penalty_cap);
        merit = p.objective(x) + penalty * viol;
        continue;
      }
      trace.status = "stalled infeasible at penalty cap";
      break;
    }

    Eigen::VectorXd x_trial = x + sub.step;
    Eigen::VectorXd resid_trial;
    std::vector<JacEntry> jac_trial;
    p.evaluate(x_trial, &resid_trial, &jac_trial);
    double viol_trial = resid_trial.allFinite() ? total_violation(resid_trial) : 1e300;
    double merit_trial = p.objective(x_trial) + penalty * viol_trial;
    double ared = merit - merit_trial;
    double ratio = pred_decrease > 1e-16 ? ared / pred_decrease : (ared > 0.0 ? 1.0 : -1.0);

    if (ratio >= 0.1 && std::isfinite(merit_trial)) {
      x.swap(x_trial);
      resid.swap(resid_trial);
      jac.swap(jac_trial);
      viol = viol_trial;
      merit = merit_trial;
      ++trace.accepted_steps;
      trace.merit_history.push_back(merit);
      if (viol < best_viol || (viol <= o.tol_feas && best_viol <= o.tol_feas)) {
        best_viol = viol;
        best_x = x;
      }
      if (ratio >= 0.75 && step_norm >= 0.9 * radius) radius = std::min(2.0 * radius, o.tr_max);

      if (viol <= o.tol_feas && pred_decrease <= o.tol_pred) {
        converged = true;
        trace.status = "converged: violation and predicted decrease below tolerance";
        break;
      }
      // penalty escalation when violation stagnates across accepted steps
      viol_window.push_back(viol);
      if (viol > o.tol_feas && viol_window.size() >= 8) {
        double old = viol_window[viol_window.size() - 8];
        if (viol > 0.9 * old && penalty < o.penalty_cap) {
          penalty = std::min(penalty * 10.0, o.penalty_cap);
          merit = p.objective(x) + penalty * viol;
          viol_window.clear();
        }
      }
    } else {
      radius = std::max(0.25 * radius, o.tr_min);
      if (radius <= o.tr_min * (1.0 + 1e-12)) {
        trace.status = "trust region collapsed";
        break;
      }
    }
    if (o.verbose && iter % 10 == 0)
      std::fprintf(stderr, "[slp] it %3d merit %.6e viol %.3e pen %.1e tr %.2e\n", iter, merit,
                   viol, penalty, radius);
  }

  trace.iterations = iter;
  trace.final_violation = viol;
  trace.final_penalty = penalty;
  trace.final_step_norm = last_step_norm;
  trace.final_objective = p.objective(x);

  CLFArtifact art = CLFArtifact::unpack(p.layout(), x);
  art.mode = p.mode();
  art.omega = p.omega();
  Eigen::VectorXd final_resid;
  p.evaluate(x, &final_resid, nullptr);
  art.max_residual = final_resid.maxCoeff();
  art.certified = converged && art.max_residual <= o.tol_feas;
  art.trace = trace;

  if (!converged) {
    if (iter >= o.max_iterations) {
      CLFArtifact best = CLFArtifact::unpack(p.layout(), best_x);
      best.trace = trace;
      best.trace.status = "no convergence";
      Eigen::VectorXd br;
      p.evaluate(best_x, &br, nullptr);
      best.max_residual = br.maxCoeff();
      throw SlpFailure("no convergence", std::move(best));
    }
    CLFArtifact best = CLFArtifact::unpack(p.layout(), best_x);
    best.trace = trace;
    Eigen::VectorXd br;
    p.evaluate(best_x, &br, nullptr);
    best.max_residual = br.maxCoeff();
    throw SlpFailure(trace.status.empty() ? "no convergence" : trace.status, std::move(best));
  }
  return art;
}

void normalize_artifact(const geometry::Template& t, CLFArtifact& art) {
  // vertical shift of the epigraph: z2 -> z2 + c h2, y -> y + c leaves every
  // design-problem residual unchanged and moves min M to zero
  double m0 = 1e300;
  for (const auto& vm : t.vertex_maps) m0 = std::min(m0, vm.height(art.z));
  double c = -m0;
  for (int j = 0; j < t.f2; ++j) art.z[t.f1 + j] += c * t.h2[j];
  art.y.array() += c;
  art.shift += c;
}

CLFArtifact two_stage_solve(const geometry::Template& t, const model::SystemModel& m,
                            const SynthesisOptions& opts, const double* omega) {
  if (omega != nullptr) {
    SynthesisProblem p(t, m, ObjectiveMode::Combined, *omega);
    Eigen::VectorXd x0 = initial_guess(p, opts.shrink);
    CLFArtifact art = solve_slp(p, x0, opts);
    normalize_artifact(t, art);
    art.omega = *omega;
    return art;
  }
  SynthesisProblem p(t, m, ObjectiveMode::Domain);
  Eigen::VectorXd x0 = initial_guess(p, opts.shrink);
  CLFArtifact stage1 = solve_slp(p, x0, opts);

  p.set_mode(ObjectiveMode::Drift);
  p.fix_domain_offsets(stage1.z.head(t.f1));
  CLFArtifact stage2 = solve_slp(p, stage1.pack(p.layout()), opts);
  normalize_artifact(t, stage2);
  return stage2;
}

}  // namespace cclf::synthesis
