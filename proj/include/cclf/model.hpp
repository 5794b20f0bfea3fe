#ifndef CCLF_MODEL_HPP_
#define CCLF_MODEL_HPP_

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace cclf::model {

/// Multivariate polynomial over the stacked (x, u) variables.
struct PolyTerm {
  double coef = 0.0;
  std::vector<int> powers;  // one exponent per variable
};

struct Poly {
  int num_vars = 0;
  std::vector<PolyTerm> terms;

  double eval(const Eigen::VectorXd& xu) const;
  Poly derivative(int var) const;
  int degree() const;
};

/// State constraint set: exact ball {x'x <= r^2} or polytope {Ax <= b}.
struct StateSet {
  bool is_ball = true;
  double radius = 1.0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
  int num_constraints() const { return is_ball ? 1 : int(A.rows()); }
  Eigen::VectorXd bounding_box_lo(int n_x) const;
  Eigen::VectorXd bounding_box_hi(int n_x) const;
};

/// Box set, used for U and W.
struct BoxSet {
  Eigen::VectorXd lo, hi;

  bool contains(const Eigen::VectorXd& v, double tol = 1e-9) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& v) const;
  std::vector<Eigen::VectorXd> vertices() const;  // all 2^n corners
  int dim() const { return int(lo.size()); }
};

/// Discrete-time system with polynomial right-hand side (degree <= 3).
/// Continuous fields are discretized by classical RK4 with step tau;
/// discrete fields are applied directly. The disturbance enters additively
/// after the nominal step.
class SystemModel {
public:
  int n_x = 0, n_u = 0;
  double tau = 0.0;
  bool continuous = true;          // RK4-discretized when true
  std::vector<Poly> field;         // n_x polynomials over (x, u)
  Poly cost;                       // stage cost L(x, u) >= 0
  StateSet X;
  BoxSet U;
  BoxSet W;
  double gamma = 0.0, alpha = 2.0, sigma = 0.0, beta = 2.0;
  std::string name;

  // nominal discrete map f(x, u)
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  void step_jacobians(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::MatrixXd* dfdx,
                      Eigen::MatrixXd* dfdu) const;

  double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  void stage_cost_gradients(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                            Eigen::VectorXd* dLdx, Eigen::VectorXd* dLdu) const;

  int num_u_constraints() const { return 2 * n_u; }

  /// Structural checks: gamma = 0 only for affine fields, sigma = 0 only for
  /// convex costs, W compact containing 0, L >= 0 on sampled X x U.
  void check_consistency() const;
};

/// Classical RK4 update for piecewise-constant u over [0, tau].
Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double tau);

/// Van der Pol preset from the case study: RK4 with tau = 0.05,
/// L = (tau/2)(x2^2 + u^2), X = {x'x <= 9}, U = [-2,2], W = [-0.005,0.005]^2.
SystemModel vdp_preset();

struct NonlinearityEstimate {
  double gamma_hat = 0.0;
  double sigma_hat = 0.0;
  int samples_used = 0;
};

/// Diagnostic Hessian-based estimates of the Assumption 1/2 constants via
/// central finite differences on a Halton sample of X x U. The declared
/// model constants remain authoritative.
NonlinearityEstimate estimate_nonlinearity(const SystemModel& m, int n_samples);

/// g_j = max_{|n|_inf <= 1} G_j n  (row 1-norms).
Eigen::VectorXd row_gain(const Eigen::MatrixXd& G);

/// wbar_j = max_{w in W} G_j w for a box W.
Eigen::VectorXd support_W(const Eigen::MatrixXd& G, const BoxSet& W);

/// Halton sequence point (base sequence 2, 3, 5, 7, 11, ...), index >= 1.
Eigen::VectorXd halton_point(int index, int dim);

}  // namespace cclf::model

#endif  // CCLF_MODEL_HPP_
