#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cclf/common.hpp"
#include "cclf/lp.hpp"
#include "cclf/model.hpp"
#include "cclf/synthesis.hpp"
#include "test_util.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace cclf;
using namespace cclf::synthesis;

TEST_CASE("variable and constraint counts follow the problem-size formulas") {
  auto t = testutil::desk_template();
  auto m = model::vdp_preset();
  SynthesisProblem p(t, m, ObjectiveMode::Drift);
  int v = t.num_vertices();
  CHECK(p.num_vars() == 1 + v * (m.n_u + 3) + t.f());
  CHECK(p.nominal_constraint_count() == long(v) * (3 + t.f() + 1 + 2) + t.e_rows);
}

TEST_CASE("affine model with zero constants collapses lambda/kappa rows") {
  auto t = testutil::small_template();
  auto m = testutil::affine_demo();
  SynthesisProblem p(t, m, ObjectiveMode::Drift);
  int lam_rows = 0, kap_rows = 0;
  for (const auto& ri : p.row_info()) {
    if (ri.family == Family::Lambda) {
      ++lam_rows;
      CHECK(ri.aux == -1);
    }
    if (ri.family == Family::Kappa) ++kap_rows;
  }
  CHECK(lam_rows == t.num_vertices());
  CHECK(kap_rows == t.num_vertices());

  // the collapsed rows are exactly lambda_i >= 0, kappa_i >= 0
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.num_vars());
  for (int i = 0; i < t.num_vertices(); ++i) {
    x[p.layout().lam(i)] = 0.25 + i;
    x[p.layout().kap(i)] = 0.5;
  }
  Eigen::VectorXd r;
  p.evaluate(x, &r, nullptr);
  for (int k = 0; k < int(p.row_info().size()); ++k) {
    if (p.row_info()[k].family == Family::Lambda)
      CHECK(r[k] == -x[p.layout().lam(p.row_info()[k].vertex)]);
  }
}

TEST_CASE("residual jacobian matches central finite differences") {
  auto t = testutil::small_template();
  auto m = model::vdp_preset();
  SynthesisProblem p(t, m, ObjectiveMode::Drift);
  Eigen::VectorXd x0 = initial_guess(p, 1.0);
  CounterRng rng(2024, 11);

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x = x0;
    for (int k = 0; k < x.size(); ++k) x[k] += 0.05 * (2.0 * rng.next_double() - 1.0);

    Eigen::VectorXd r0;
    std::vector<JacEntry> jac;
    p.evaluate(x, &r0, &jac);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(r0.size(), x.size());
    for (const auto& e : jac) J(e.row, e.col) += e.value;

    // probe a deterministic subset of variables
    for (int probe = 0; probe < 10; ++probe) {
      int k = int(rng.next_below(std::uint64_t(x.size())));
      double h = 1e-6 * (1.0 + std::abs(x[k]));
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      Eigen::VectorXd rp, rm;
      p.evaluate(xp, &rp, nullptr);
      p.evaluate(xm, &rm, nullptr);
      Eigen::VectorXd fd = (rp - rm) / (2.0 * h);
      double scale = 1.0 + fd.cwiseAbs().maxCoeff();
      double err = (fd - J.col(k)).cwiseAbs().maxCoeff();
      CHECK(err / scale <= 1e-5);
    }
  }
}

TEST_CASE("dual subproblem equals a directly formulated penalty LP") {
  // small instance: compare the SLP step computed via the dual form against
  // the straightforward row formulation solved independently
  auto t = testutil::small_template();
  auto m = testutil::affine_demo();
  SynthesisProblem p(t, m, ObjectiveMode::Drift);
  Eigen::VectorXd x = initial_guess(p, 1.0);

  Eigen::VectorXd resid;
  std::vector<JacEntry> jac;
  p.evaluate(x, &resid, &jac);
  Eigen::VectorXd grad = p.objective_gradient();
  double penalty = 10.0, radius = 0.3;
  int n = p.num_vars(), mr = int(resid.size());

  // direct primal: variables [step; slacks]
  lp::LinearProgram direct;
  direct.num_vars = n + mr;
  direct.num_rows = mr;
  direct.c.resize(n + mr);
  direct.lo.resize(n + mr);
  direct.hi.resize(n + mr);
  for (int k = 0; k < n; ++k) {
    direct.c[k] = grad[k];
    direct.lo[k] = std::max(-radius, p.var_lo[k] - x[k]);
    direct.hi[k] = std::min(radius, p.var_hi[k] - x[k]);
  }
  for (int r = 0; r < mr; ++r) {
    direct.c[n + r] = penalty;
    direct.lo[n + r] = 0.0;
    direct.hi[n + r] = 1e30;
  }
  for (const auto& e : jac) direct.add_entry(e.row, e.col, e.value);
  for (int r = 0; r < mr; ++r) direct.add_entry(r, n + r, -1.0);
  direct.b = -resid;
  direct.sense.assign(mr, lp::RowSense::LessEqual);
  auto dsol = lp::solve_lp(direct);
  REQUIRE(dsol.status == lp::LpStatus::Optimal);

  double direct_opt = dsol.objective;
  REQUIRE(std::isfinite(direct_opt));

  // dual route: same optimum value, and its step reproduces it
  auto sub = slp_subproblem(p, x, penalty, radius);
  CHECK(std::abs(sub.predicted_merit - direct_opt) <= 1e-6 * (1.0 + std::abs(direct_opt)));

  Eigen::VectorXd lin = resid;
  for (const auto& e : jac) lin[e.row] += e.value * sub.step[e.col];
  double viol = 0.0;
  for (int r = 0; r < mr; ++r) viol += std::max(0.0, lin[r]);
  CHECK(std::abs((grad.dot(sub.step) + penalty * viol) - sub.predicted_merit) <=
        1e-7 * (1.0 + std::abs(sub.predicted_merit)));
  for (int k = 0; k < n; ++k) {
    CHECK(sub.step[k] >= std::max(-radius, p.var_lo[k] - x[k]) - 1e-9);
    CHECK(sub.step[k] <= std::min(radius, p.var_hi[k] - x[k]) + 1e-9);
  }
}

TEST_CASE("initial guess satisfies configuration, domain and cost rows") {
  auto t = testutil::desk_template();
  auto m = model::vdp_preset();
  SynthesisProblem p(t, m, ObjectiveMode::Domain);
  Eigen::VectorXd x = initial_guess(p, 1.0);

  Eigen::VectorXd z(t.f());
  for (int j = 0; j < t.f(); ++j) z[j] = x[p.layout().z(j)];
  CHECK(t.edge_residual(z).maxCoeff() <= 1e-9);
  for (const auto& vm : t.vertex_maps) CHECK(m.X.contains(vm.state(z), 1e-9));

  Eigen::VectorXd r;
  p.evaluate(x, &r, nullptr);
  const auto& info = p.row_info();
  for (int k = 0; k < r.size(); ++k) {
    if (info[k].family == Family::Cost) CHECK(r[k] <= 1e-9);
    if (info[k].family == Family::ControlSet) CHECK(r[k] <= 1e-12);
    if (info[k].family == Family::Lambda) CHECK(r[k] <= 1e-12);
    if (info[k].family == Family::Kappa) CHECK(r[k] <= 1e-12);
  }
}

TEST_CASE("affine sanity: zero cost gives nonpositive drift and quick convergence") {
  auto t = testutil::small_template();
  auto m = testutil::affine_demo();
  SynthesisProblem p(t, m, ObjectiveMode::Drift);
  Eigen::VectorXd x0 = initial_guess(p, 1.0);
  // L = 0 and a contractive map: the guess needs at most the small
  // disturbance margin as drift
  CHECK(x0[p.layout().d()] <= 0.01);

  SynthesisOptions o;
  CLFArtifact art = solve_slp(p, x0, o);
  CHECK(art.certified);
  CHECK(art.d <= 1e-6);
  CHECK(art.max_residual <= 1e-6);

  // re-solving from the solution leaves the iterate unchanged
  SynthesisOptions o2;
  o2.max_iterations = 5;
  CLFArtifact art2 = solve_slp(p, art.pack(p.layout()), o2);
  CHECK(art2.trace.final_step_norm <= 1e-8);
  CHECK(std::abs(art2.d - art.d) <= 1e-9);
}

TEST_CASE("merit history is monotone along accepted steps") {
  auto t = testutil::small_template();
  auto m = model::vdp_preset();
  SynthesisProblem p(t, m, ObjectiveMode::Domain);
  Eigen::VectorXd x0 = initial_guess(p, 1.0);
  CLFArtifact art = solve_slp(p, x0);
  const auto& h = art.trace.merit_history;
  REQUIRE(h.size() >= 2);
  int raises = 0;
  for (std::size_t k = 1; k < h.size(); ++k)
    if (h[k] > h[k - 1] + 1e-7 * (1.0 + std::abs(h[k - 1]))) ++raises;
  // merit may only jump when the penalty weight is raised between steps
  CHECK(raises <= int(std::log10(art.trace.final_penalty / 10.0) + 1.5));
}

TEST_CASE("Van der Pol desk-scale two-stage synthesis") {
  auto t = testutil::desk_template();
  auto m = model::vdp_preset();
  CLFArtifact art = two_stage_solve(t, m);

  CHECK(art.certified);
  CHECK(art.max_residual <= 1e-6);
  CHECK(art.d <= 0.5);
  CHECK(t.edge_residual(art.z).maxCoeff() <= 1e-8);

  // normalization: min over vertices of M equals 0
  double m0 = 1e300;
  for (const auto& vm : t.vertex_maps) m0 = std::min(m0, vm.height(art.z));
  CHECK(std::abs(m0) <= 1e-9);

  // vertex controls are feasible
  for (int i = 0; i < t.num_vertices(); ++i)
    CHECK(m.U.contains(art.u.row(i).transpose(), 1e-9));

  // residual report agrees with the artifact
  SynthesisProblem p(t, m, ObjectiveMode::Drift);
  auto rep = residual_report(p, art.pack(p.layout()));
  CHECK(rep.overall <= 1e-6);

  // stage-1 domain covers most of X (Monte-Carlo over the ball)
  CounterRng rng(5150, 2);
  int in_dom = 0, total = 0;
  for (int s = 0; s < 20000; ++s) {
    Eigen::Vector2d xpt(rng.next_double(-3.0, 3.0), rng.next_double(-3.0, 3.0));
    if (xpt.norm() > 3.0) continue;
    ++total;
    bool inside = true;
    for (int j = 0; j < t.f1 && inside; ++j)
      inside = t.G1.row(j).dot(xpt) <= art.z[j] + 1e-12;
    if (inside) ++in_dom;
  }
  double ratio = double(in_dom) / double(total);
  CHECK(ratio >= 0.9);
}
