#include "cclf/model.hpp"

#include "cclf/common.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace cclf::model {

double Poly::eval(const Eigen::VectorXd& xu) const {
  double s = 0.0;
  for (const auto& t : terms) {
    double m = t.coef;
    for (int v = 0; v < num_vars; ++v)
      for (int p = 0; p < t.powers[v]; ++p) m *= xu[v];
    s += m;
  }
  return s;
}

Poly Poly::derivative(int var) const {
  Poly d;
  d.num_vars = num_vars;
  for (const auto& t : terms) {
    if (t.powers[var] == 0) continue;
    PolyTerm dt = t;
    dt.coef *= double(t.powers[var]);
    dt.powers[var] -= 1;
    d.terms.push_back(std::move(dt));
  }
  return d;
}

int Poly::degree() const {
  int deg = 0;
  for (const auto& t : terms) {
    int d = 0;
    for (int p : t.powers) d += p;
    deg = std::max(deg, d);
  }
  return deg;
}

bool StateSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (is_ball) return x.squaredNorm() <= radius * radius + tol;
  for (int r = 0; r < A.rows(); ++r)
    if (A.row(r).dot(x) > b[r] + tol) return false;
  return true;
}

Eigen::VectorXd StateSet::bounding_box_lo(int n_x) const {
  if (is_ball) return Eigen::VectorXd::Constant(n_x, -radius);
  // per-axis support of the polytope by corner enumeration of 2D H-reps is
  // overkill here; a coarse box from row-wise bounds is enough for sampling
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n_x, -1e30);
  for (int k = 0; k < n_x; ++k) {
    for (int r = 0; r < A.rows(); ++r) {
      // row a'x <= b with a = -e_k c (c>0) gives x_k >= -b/c
      bool axis = true;
      for (int j = 0; j < n_x; ++j)
        if (j != k && std::abs(A(r, j)) > 1e-12) axis = false;
      if (axis && A(r, k) < -1e-12) lo[k] = std::max(lo[k], b[r] / A(r, k));
    }
  }
  return lo;
}

Eigen::VectorXd StateSet::bounding_box_hi(int n_x) const {
  if (is_ball) return Eigen::VectorXd::Constant(n_x, radius);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n_x, 1e30);
  for (int k = 0; k < n_x; ++k) {
    for (int r = 0; r < A.rows(); ++r) {
      bool axis = true;
      for (int j = 0; j < n_x; ++j)
        if (j != k && std::abs(A(r, j)) > 1e-12) axis = false;
      if (axis && A(r, k) > 1e-12) hi[k] = std::min(hi[k], b[r] / A(r, k));
    }
  }
  return hi;
}

bool BoxSet::contains(const Eigen::VectorXd& v, double tol) const {
  for (int k = 0; k < lo.size(); ++k)
    if (v[k] < lo[k] - tol || v[k] > hi[k] + tol) return false;
  return true;
}

Eigen::VectorXd BoxSet::clamp(const Eigen::VectorXd& v) const {
  Eigen::VectorXd w = v;
  for (int k = 0; k < lo.size(); ++k) w[k] = std::min(std::max(w[k], lo[k]), hi[k]);
  return w;
}

std::vector<Eigen::VectorXd> BoxSet::vertices() const {
  int n = dim();
  std::vector<Eigen::VectorXd> vs;
  vs.reserve(std::size_t(1) << n);
  for (int mask = 0; mask < (1 << n); ++mask) {
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v[k] = (mask >> k) & 1 ? hi[k] : lo[k];
    vs.push_back(std::move(v));
  }
  return vs;
}

Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double tau) {
  Eigen::VectorXd k1 = field(x, u);
  Eigen::VectorXd k2 = field(x + 0.5 * tau * k1, u);
  Eigen::VectorXd k3 = field(x + 0.5 * tau * k2, u);
  Eigen::VectorXd k4 = field(x + tau * k3, u);
  Eigen::VectorXd out = x + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) fail(ErrorCode::Numerical, "dynamics overflow");
  return out;
}

namespace {

Eigen::VectorXd eval_field(const std::vector<Poly>& field, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u) {
  Eigen::VectorXd xu(x.size() + u.size());
  xu << x, u;
  Eigen::VectorXd out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) out[int(i)] = field[i].eval(xu);
  return out;
}

// Jacobian of the polynomial field w.r.t. the stacked (x, u)
void field_jacobian(const std::vector<Poly>& field, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& u, Eigen::MatrixXd& Jx, Eigen::MatrixXd& Ju) {
  int n_x = int(x.size()), n_u = int(u.size());
  Eigen::VectorXd xu(n_x + n_u);
  xu << x, u;
  Jx.resize(int(field.size()), n_x);
  Ju.resize(int(field.size()), n_u);
  for (std::size_t i = 0; i < field.size(); ++i) {
    for (int v = 0; v < n_x; ++v) Jx(int(i), v) = field[i].derivative(v).eval(xu);
    for (int v = 0; v < n_u; ++v) Ju(int(i), v) = field[i].derivative(n_x + v).eval(xu);
  }
}

}  // namespace

Eigen::VectorXd SystemModel::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (!continuous) {
    Eigen::VectorXd out = eval_field(field, x, u);
    if (!out.allFinite()) fail(ErrorCode::Numerical, "dynamics overflow");
    return out;
  }
  return rk4_step([this](const Eigen::VectorXd& xx,
                         const Eigen::VectorXd& uu) { return eval_field(field, xx, uu); },
                  x, u, tau);
}

void SystemModel::step_jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 Eigen::MatrixXd* dfdx, Eigen::MatrixXd* dfdu) const {
  Eigen::MatrixXd Jx, Ju;
  if (!continuous) {
    field_jacobian(field, x, u, Jx, Ju);
    if (dfdx) *dfdx = Jx;
    if (dfdu) *dfdu = Ju;
    return;
  }
  // chain rule through the four RK4 stages
  auto f = [this](const Eigen::VectorXd& xx, const Eigen::VectorXd& uu) {
    return eval_field(field, xx, uu);
  };
  int n = n_x;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd k1 = f(x, u);
  Eigen::MatrixXd J1x, J1u;
  field_jacobian(field, x, u, J1x, J1u);

  Eigen::VectorXd x2 = x + 0.5 * tau * k1;
  Eigen::VectorXd k2 = f(x2, u);
  Eigen::MatrixXd J2x, J2u;
  field_jacobian(field, x2, u, J2x, J2u);
  Eigen::MatrixXd D2x = J2x * (I + 0.5 * tau * J1x);
  Eigen::MatrixXd D2u = J2u + J2x * (0.5 * tau * J1u);

  Eigen::VectorXd x3 = x + 0.5 * tau * k2;
  Eigen::VectorXd k3 = f(x3, u);
  Eigen::MatrixXd J3x, J3u;
  field_jacobian(field, x3, u, J3x, J3u);
  Eigen::MatrixXd D3x = J3x * (I + 0.5 * tau * D2x);
  Eigen::MatrixXd D3u = J3u + J3x * (0.5 * tau * D2u);

  Eigen::VectorXd x4 = x + tau * k3;
  Eigen::MatrixXd J4x, J4u;
  field_jacobian(field, x4, u, J4x, J4u);
  Eigen::MatrixXd D4x = J4x * (I + tau * D3x);
  Eigen::MatrixXd D4u = J4u + J4x * (tau * D3u);

  if (dfdx) *dfdx = I + (tau / 6.0) * (J1x + 2.0 * D2x + 2.0 * D3x + D4x);
  if (dfdu) *dfdu = (tau / 6.0) * (J1u + 2.0 * D2u + 2.0 * D3u + D4u);
}

double SystemModel::stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::VectorXd xu(n_x + n_u);
  xu << x, u;
  return cost.eval(xu);
}

void SystemModel::stage_cost_gradients(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                       Eigen::VectorXd* dLdx, Eigen::VectorXd* dLdu) const {
  Eigen::VectorXd xu(n_x + n_u);
  xu << x, u;
  if (dLdx) {
    dLdx->resize(n_x);
    for (int v = 0; v < n_x; ++v) (*dLdx)[v] = cost.derivative(v).eval(xu);
  }
  if (dLdu) {
    dLdu->resize(n_u);
    for (int v = 0; v < n_u; ++v) (*dLdu)[v] = cost.derivative(n_x + v).eval(xu);
  }
}

void SystemModel::check_consistency() const {
  if (int(field.size()) != n_x) fail(ErrorCode::Usage, "model: field dimension mismatch");
  for (const auto& p : field) {
    if (p.num_vars != n_x + n_u) fail(ErrorCode::Usage, "model: field variable count mismatch");
    if (p.degree() > 3) fail(ErrorCode::Usage, "model: field degree above 3");
  }
  if (cost.num_vars != n_x + n_u) fail(ErrorCode::Usage, "model: cost variable count mismatch");
  if (cost.degree() > 2) fail(ErrorCode::Usage, "model: cost degree above 2");
  if (gamma < 0.0 || sigma < 0.0 || alpha < 0.0 || beta < 1.0)
    fail(ErrorCode::Usage, "model: invalid nonlinearity constants");
  if (gamma == 0.0) {
    for (const auto& p : field)
      if (p.degree() > 1)
        fail(ErrorCode::Usage, "model: gamma = 0 declared for a non-affine field");
  }
  if (W.dim() != n_x || U.dim() != n_u) fail(ErrorCode::Usage, "model: set dimension mismatch");
  for (int k = 0; k < n_x; ++k)
    if (!(W.lo[k] <= 0.0 && W.hi[k] >= 0.0 && std::isfinite(W.lo[k]) && std::isfinite(W.hi[k])))
      fail(ErrorCode::Usage, "model: W must be a compact box containing 0");
  if (sigma == 0.0) {
    // convexity declaration: quadratic part of L must be PSD
    int nv = n_x + n_u;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nv, nv);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(nv);
    for (int a = 0; a < nv; ++a)
      for (int c = 0; c < nv; ++c) H(a, c) = cost.derivative(a).derivative(c).eval(zero);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    if (es.eigenvalues().minCoeff() < -1e-10)
      fail(ErrorCode::Usage, "model: sigma = 0 declared for a non-convex cost");
  }
  // sampled nonnegativity of L over X x U
  Eigen::VectorXd xlo = X.bounding_box_lo(n_x), xhi = X.bounding_box_hi(n_x);
  int checked = 0;
  for (int i = 1; checked < 1000 && i < 100000; ++i) {
    Eigen::VectorXd h = halton_point(i, n_x + n_u);
    Eigen::VectorXd x(n_x), u(n_u);
    for (int k = 0; k < n_x; ++k) x[k] = xlo[k] + (xhi[k] - xlo[k]) * h[k];
    for (int k = 0; k < n_u; ++k) u[k] = U.lo[k] + (U.hi[k] - U.lo[k]) * h[n_x + k];
    if (!X.contains(x)) continue;
    ++checked;
    if (stage_cost(x, u) < -1e-12)
      fail(ErrorCode::Usage, "model: stage cost negative on X x U");
  }
}

SystemModel vdp_preset() {
  SystemModel m;
  m.name = "vdp";
  m.n_x = 2;
  m.n_u = 1;
  m.tau = 0.05;
  m.continuous = true;

  auto term = [](double c, int p0, int p1, int p2) {
    PolyTerm t;
    t.coef = c;
    t.powers = {p0, p1, p2};
    return t;
  };
  // xdot1 = x2
  Poly f1;
  f1.num_vars = 3;
  f1.terms = {term(1.0, 0, 1, 0)};
  // xdot2 = -x1 - 0.5 x2 (1 - x1^2) + x1 u = -x1 - 0.5 x2 + 0.5 x1^2 x2 + x1 u
  Poly f2;
  f2.num_vars = 3;
  f2.terms = {term(-1.0, 1, 0, 0), term(-0.5, 0, 1, 0), term(0.5, 2, 1, 0), term(1.0, 1, 0, 1)};
  m.field = {f1, f2};

  // L = (tau/2)(x2^2 + u^2)
  Poly L;
  L.num_vars = 3;
  L.terms = {term(0.5 * m.tau, 0, 2, 0), term(0.5 * m.tau, 0, 0, 2)};
  m.cost = L;

  m.X.is_ball = true;
  m.X.radius = 3.0;
  m.U.lo = Eigen::VectorXd::Constant(1, -2.0);
  m.U.hi = Eigen::VectorXd::Constant(1, 2.0);
  m.W.lo = Eigen::VectorXd::Constant(2, -0.005);
  m.W.hi = Eigen::VectorXd::Constant(2, 0.005);

  m.gamma = 0.05;
  m.alpha = 2.0;
  m.sigma = 0.0;
  m.beta = 2.0;
  m.check_consistency();
  return m;
}

Eigen::VectorXd halton_point(int index, int dim) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
  if (dim > 8) fail(ErrorCode::Usage, "halton dimension above 8");
  Eigen::VectorXd p(dim);
  for (int d = 0; d < dim; ++d) {
    int base = primes[d];
    double f = 1.0, r = 0.0;
    int i = index;
    while (i > 0) {
      f /= base;
      r += f * (i % base);
      i /= base;
    }
    p[d] = r;
  }
  return p;
}

NonlinearityEstimate estimate_nonlinearity(const SystemModel& m, int n_samples) {
  NonlinearityEstimate est;
  int nv = m.n_x + m.n_u;
  Eigen::VectorXd xlo = m.X.bounding_box_lo(m.n_x), xhi = m.X.bounding_box_hi(m.n_x);

  auto eval_f = [&](const Eigen::VectorXd& xu, int comp) {
    Eigen::VectorXd x = xu.head(m.n_x), u = xu.tail(m.n_u);
    return m.step(x, u)[comp];
  };
  auto eval_l = [&](const Eigen::VectorXd& xu) {
    return m.stage_cost(xu.head(m.n_x), xu.tail(m.n_u));
  };

  Eigen::MatrixXd H(nv, nv);
  auto hessian = [&](auto&& fun, const Eigen::VectorXd& xu) {
    for (int a = 0; a < nv; ++a) {
      double ha = 1e-3 * (1.0 + std::abs(xu[a]));
      Eigen::VectorXd e = Eigen::VectorXd::Zero(nv);
      e[a] = ha;
      H(a, a) = (fun(xu + e) - 2.0 * fun(xu) + fun(xu - e)) / (ha * ha);
      for (int c = a + 1; c < nv; ++c) {
        double hc = 1e-3 * (1.0 + std::abs(xu[c]));
        Eigen::VectorXd ec = Eigen::VectorXd::Zero(nv);
        ec[c] = hc;
        double v = (fun(xu + e + ec) - fun(xu + e - ec) - fun(xu - e + ec) + fun(xu - e - ec)) /
                   (4.0 * ha * hc);
        H(a, c) = v;
        H(c, a) = v;
      }
    }
  };

  for (int i = 1; est.samples_used < n_samples && i < 50 * n_samples + 1000; ++i) {
    Eigen::VectorXd h = halton_point(i, nv);
    Eigen::VectorXd xu(nv);
    for (int k = 0; k < m.n_x; ++k) xu[k] = xlo[k] + (xhi[k] - xlo[k]) * h[k];
    for (int k = 0; k < m.n_u; ++k)
      xu[m.n_x + k] = m.U.lo[k] + (m.U.hi[k] - m.U.lo[k]) * h[m.n_x + k];
    if (!m.X.contains(xu.head(m.n_x))) continue;
    ++est.samples_used;

    for (int comp = 0; comp < m.n_x; ++comp) {
      hessian([&](const Eigen::VectorXd& p) { return eval_f(p, comp); }, xu);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
      double nrm = es.eigenvalues().cwiseAbs().maxCoeff();
      est.gamma_hat = std::max(est.gamma_hat, 0.5 * nrm);
    }
    hessian(eval_l, xu);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
    double neg = -es.eigenvalues().minCoeff();
    if (neg > 1e-7) est.sigma_hat = std::max(est.sigma_hat, 0.5 * neg);
  }
  return est;
}

Eigen::VectorXd row_gain(const Eigen::MatrixXd& G) {
  Eigen::VectorXd g(G.rows());
  for (int r = 0; r < G.rows(); ++r) g[r] = G.row(r).cwiseAbs().sum();
  return g;
}

Eigen::VectorXd support_W(const Eigen::MatrixXd& G, const BoxSet& W) {
  Eigen::VectorXd wbar(G.rows());
  for (int r = 0; r < G.rows(); ++r) {
    double s = 0.0;
    for (int k = 0; k < G.cols(); ++k) s += std::max(G(r, k) * W.lo[k], G(r, k) * W.hi[k]);
    wbar[r] = s;
  }
  return wbar;
}

}  // namespace cclf::model
