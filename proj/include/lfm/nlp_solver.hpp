#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace lfm {

/// Smooth box- and inequality-constrained minimization problem.
/// Inequalities follow the convention g(z) <= 0. If lagrangian_gradient is
/// not supplied, gradients are taken by finite differences.
struct NlpProblem {
  int dim = 0;
  Eigen::VectorXd lo, hi; // box bounds, +-inf allowed; empty means unbounded

  std::function<double(const Eigen::VectorXd&)> objective;

  int num_constraints = 0;
  std::function<void(const Eigen::VectorXd&, Eigen::Ref<Eigen::VectorXd>)>
      constraints;

  /// Gradient of objective(z) + c . g(z) for a given weight vector c.
  /// Callers with simulation-based sensitivities supply this; otherwise the
  /// solver falls back to bound-respecting central differences.
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd& c,
                     Eigen::Ref<Eigen::VectorXd>)>
      lagrangian_gradient;

  double fd_step = 1e-6;
};

struct SolveTolerances {
  double eps_opt = 1e-6;  // projected-gradient infinity norm
  double eps_feas = 1e-6; // max constraint violation
  int max_inner = 500;    // projected quasi-Newton iterations per outer pass
  int max_outer = 20;     // augmented-Lagrangian passes
  double rho0 = 1.0;
  double rho_growth = 10.0;
  int lbfgs_memory = 10;
  double armijo_c = 1e-4;
};

struct SolveReport {
  Eigen::VectorXd z;
  double objective = 0.0;
  double max_violation = 0.0;
  double projected_gradient_norm = 0.0;
  int inner_iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  std::string reason;
  Eigen::VectorXd multipliers;
  std::vector<double> outer_violation_history;
};

/// Minimize the problem from z0 (projected into the box if outside).
/// mu0 optionally warm-starts the constraint multipliers.
SolveReport solve(const NlpProblem& problem, const Eigen::VectorXd& z0,
                  const SolveTolerances& tol = {},
                  const Eigen::VectorXd* mu0 = nullptr);

} // namespace lfm
