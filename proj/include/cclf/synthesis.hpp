#ifndef CCLF_SYNTHESIS_HPP_
#define CCLF_SYNTHESIS_HPP_

#include "cclf/common.hpp"
#include "cclf/geometry.hpp"
#include "cclf/model.hpp"

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

namespace cclf::synthesis {

enum class ObjectiveMode { Drift, Domain, Combined };

struct JacEntry {
  int row = 0, col = 0;
  double value = 0.0;
};

/// Index layout for the decision vector (d, u_1..u_v, y_1..y_v, z, lam, kap).
struct VariableLayout {
  int v = 0, f = 0, n_u = 0;
  int d() const { return 0; }
  int u(int i, int k = 0) const { return 1 + i * n_u + k; }
  int y(int i) const { return 1 + v * n_u + i; }
  int z(int j) const { return 1 + v * n_u + v + j; }
  int lam(int i) const { return 1 + v * n_u + v + f + i; }
  int kap(int i) const { return 1 + v * n_u + v + f + v + i; }
  int size() const { return 1 + v * (n_u + 3) + f; }
};

enum class Family { Cost, Invariance, Lambda, Kappa, StateSet, ControlSet, Edge };

struct RowInfo {
  Family family;
  int vertex = -1;  // owning vertex, -1 for edge rows
  int aux = -1;     // facet index / neighbor index / constraint index
};

/// The nonlinear program over a template and model: residual and sparse
/// Jacobian evaluation for the five constraint families plus the structural
/// rows, with cached row gains g and disturbance support wbar.
class SynthesisProblem {
public:
  SynthesisProblem(const geometry::Template& t, const model::SystemModel& m, ObjectiveMode mode,
                   double omega = 0.0);

  const geometry::Template& templ() const { return *t_; }
  const model::SystemModel& model() const { return *m_; }
  const VariableLayout& layout() const { return lay_; }
  int num_vars() const { return lay_.size(); }
  int num_rows() const { return int(rows_.size()); }
  const std::vector<RowInfo>& row_info() const { return rows_; }

  /// Nominal count v(3 + f + n_X + n_U) + e from the problem-size accounting.
  long nominal_constraint_count() const;

  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd objective_gradient() const;  // constant (linear objective)

  /// Residual vector (feasible iff <= 0) and optionally the sparse Jacobian.
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* residuals,
                std::vector<JacEntry>* jac) const;

  const Eigen::VectorXd& row_gains() const { return g_; }
  const Eigen::VectorXd& disturbance_support() const { return wbar_; }
  double d_max() const { return d_max_; }

  ObjectiveMode mode() const { return mode_; }
  double omega() const { return omega_; }
  void set_mode(ObjectiveMode mode, double omega = 0.0) {
    mode_ = mode;
    omega_ = omega;
  }

  // variable bounds (d capped by d_max; stage 2 pins the domain entries of z)
  Eigen::VectorXd var_lo, var_hi;
  void fix_domain_offsets(const Eigen::VectorXd& z1);

private:
  const geometry::Template* t_;
  const model::SystemModel* m_;
  VariableLayout lay_;
  ObjectiveMode mode_;
  double omega_ = 0.0;
  Eigen::VectorXd g_, wbar_;
  double d_max_ = 0.0;
  std::vector<RowInfo> rows_;
  double norm_smooth_ = 0.0;  // epsilon under the square root for alpha/beta < 2
};

struct SolveTrace {
  int iterations = 0;
  int accepted_steps = 0;
  double final_violation = 0.0;
  double final_penalty = 0.0;
  double final_step_norm = 0.0;
  double final_objective = 0.0;
  std::vector<double> merit_history;  // merit after each accepted step
  std::string status;
};

struct CLFArtifact {
  Eigen::VectorXd z;       // f
  double d = 0.0;
  Eigen::MatrixXd u;       // v x n_u vertex controls
  Eigen::VectorXd y;       // v
  Eigen::VectorXd lambda;  // v
  Eigen::VectorXd kappa;   // v
  bool certified = false;
  double max_residual = 0.0;
  double shift = 0.0;  // normalization shift applied so that min M = 0
  std::string template_fingerprint, model_fingerprint;
  SolveTrace trace;
  ObjectiveMode mode = ObjectiveMode::Drift;
  double omega = 0.0;

  Eigen::VectorXd pack(const VariableLayout& lay) const;
  static CLFArtifact unpack(const VariableLayout& lay, const Eigen::VectorXd& x);
};

struct SynthesisOptions {
  double tol_feas = 1e-6;
  double tol_step = 1e-8;
  double tol_pred = 1e-8;
  int max_iterations = 500;
  double penalty_init = 10.0;
  double penalty_cap = 1e8;
  double tr_min = 1e-10;
  double tr_max = 1e3;
  double shrink = 1.0;  // initial-guess domain scaling
  bool verbose = false;
  std::string lp_dump_path;
};

/// Thrown when the SLP fails; carries the best point found.
class SlpFailure : public Error {
public:
  SlpFailure(const std::string& what, CLFArtifact best)
      : Error(ErrorCode::Numerical, what), best_(std::make_shared<CLFArtifact>(std::move(best))) {}
  const CLFArtifact& best() const { return *best_; }

private:
  std::shared_ptr<CLFArtifact> best_;
};

/// Feasible-enough starting point: scaled reference configuration inside X,
/// controls projected to U, heights from the per-vertex lower-row bound,
/// lambda/kappa at their left-hand sides, d at the worst cost-row violation.
Eigen::VectorXd initial_guess(const SynthesisProblem& p, double shrink = 1.0);

/// Trust-region sequential linear programming with an l1 penalty merit.
CLFArtifact solve_slp(SynthesisProblem& p, const Eigen::VectorXd& start,
                      const SynthesisOptions& opts = {});

/// One SLP subproblem: minimizes the linearized l1-penalty merit over the
/// trust-region box around x. Returns the step and the predicted merit value
/// g'step + penalty * (linearized violation). Solved in dual form.
struct SubproblemStep {
  Eigen::VectorXd step;
  double predicted_merit = 0.0;
  double linearized_violation = 0.0;
};
SubproblemStep slp_subproblem(const SynthesisProblem& p, const Eigen::VectorXd& x,
                              double penalty, double radius);

/// Stage 1 maximizes the domain, stage 2 fixes it and minimizes the drift.
/// With omega set, a single combined run rho = d - omega * sum(z1) replaces
/// both stages.
CLFArtifact two_stage_solve(const geometry::Template& t, const model::SystemModel& m,
                            const SynthesisOptions& opts = {}, const double* omega = nullptr);

/// Shift z and y so that min_x M_z(x) = 0; residuals are invariant.
void normalize_artifact(const geometry::Template& t, CLFArtifact& art);

/// Max residual per family plus the overall max, for reports and checks.
struct ResidualReport {
  double cost = -1e30, invariance = -1e30, lambda = -1e30, kappa = -1e30;
  double state_set = -1e30, control_set = -1e30, edge = -1e30;
  double overall = -1e30;
};
ResidualReport residual_report(const SynthesisProblem& p, const Eigen::VectorXd& x);

}  // namespace cclf::synthesis

#endif  // CCLF_SYNTHESIS_HPP_
