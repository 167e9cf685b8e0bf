#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lfm/dynamics.hpp"

namespace lfm {

/// Equidistant sampling grid t_i = t0 + i * delta, i = 0..n_intervals.
struct Grid {
  double t0 = 0.0;
  double delta = 0.01;
  int n_intervals = 0;
  int substeps = 1; // RK4 substeps per interval

  double node(int i) const { return t0 + i * delta; }
  int nodes() const { return n_intervals + 1; }
  double length() const { return n_intervals * delta; }
};

/// Substep rule used when a config leaves the count at 0.
int default_substeps(double delta);

/// Piecewise-constant vector signal, one value per grid interval.
struct PiecewiseSignal {
  Grid grid;
  std::vector<Eigen::VectorXd> values;

  static PiecewiseSignal zero(const Grid& grid, int dim);
  const Eigen::VectorXd& at(int interval) const { return values[interval]; }
};

/// One classical RK4 step of the augmented dynamics with u and w_a held
/// constant. Throws "integration blow-up" if the result is not finite.
Eigen::VectorXd rk4_step(const AugmentedModel& model, const Eigen::VectorXd& x_a,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w_a,
                         double h);

/// Node states of the solution map x_a(t_i, chi, u, w): N+1 entries.
/// Signals may be empty to mean identically zero.
std::vector<Eigen::VectorXd> simulate(const AugmentedModel& model,
                                      const Eigen::VectorXd& chi,
                                      const PiecewiseSignal& u,
                                      const PiecewiseSignal& w,
                                      const Grid& grid);

/// Sensitivities of every node state with respect to the stacked parameter
/// vector [chi; w_0; ...; w_{N-1}], by finite differences on re-simulations.
/// jac[i] is n_a x (n_a + N*n_w).
struct TrajectoryJacobians {
  std::vector<Eigen::MatrixXd> jac;
};
TrajectoryJacobians trajectory_jacobians(const AugmentedModel& model,
                                         const Eigen::VectorXd& chi,
                                         const PiecewiseSignal& u,
                                         const PiecewiseSignal& w,
                                         const Grid& grid,
                                         bool central = false);

/// One full interval (delta, substeps) with the Jacobians of the step map,
/// A = d x_next / d x and B = d x_next / d w. Finite-difference columns;
/// exact for linear dynamics.
struct StepLinearization {
  Eigen::VectorXd x_next;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};
StepLinearization step_with_jacobians(const AugmentedModel& model,
                                      const Eigen::VectorXd& x_a,
                                      const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& w_a, double delta,
                                      int substeps, bool central = false);

/// Integrate one interval (substeps RK4 steps).
Eigen::VectorXd integrate_interval(const AugmentedModel& model,
                                   const Eigen::VectorXd& x_a,
                                   const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& w_a, double delta,
                                   int substeps);

/// Stage scratch so trajectory loops don't reallocate.
struct Rk4Workspace {
  Eigen::VectorXd k1, k2, k3, k4, tmp;
  void resize(int n);
};

/// Advance x in place over one interval.
void advance_interval(const AugmentedModel& model, Eigen::VectorXd& x,
                      const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                      double delta, int substeps, Rk4Workspace& ws);

} // namespace lfm
