#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "lfm/gp_ssm.hpp"

namespace lfm {

/// Matrices of a linear base model dx = A x + B u + G ell + E w, y = C x.
/// Kept alongside the evaluators so linear-only algorithms (KF/RTSS, exact
/// discretization) can read them back.
struct LinearParts {
  Eigen::MatrixXd A, B, G, C;
};

/// Physical model dx/dt = f(x, u, ell) + E w, y = h(x, u) + v with a scalar
/// latent force ell. Evaluators must be pure and total on their domain.
struct ContinuousModel {
  int n = 0;   // states
  int m_u = 0; // control inputs
  int p = 0;   // outputs
  int q = 0;   // process-disturbance channels

  std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                     double ell, Eigen::Ref<Eigen::VectorXd> dx)>
      f;
  std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                     Eigen::Ref<Eigen::VectorXd> y)>
      h;
  Eigen::MatrixXd E; // n x q disturbance map, identity by default

  std::optional<LinearParts> linear;
};

/// Build a ContinuousModel from linear system matrices. B may have zero
/// columns for autonomous systems; G must be n x 1.
ContinuousModel linear_model(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const Eigen::MatrixXd& G, const Eigen::MatrixXd& E,
                             const Eigen::MatrixXd& C);

/// Componentwise bounds for the estimation problems. Entries may be +-inf;
/// sizes must match the augmented model they are used with (state/x0: n_a,
/// w: n_w, y/v: p).
struct ConstraintSet {
  Eigen::VectorXd state_lo, state_hi;
  Eigen::VectorXd w_lo, w_hi;
  Eigen::VectorXd y_lo, y_hi;
  Eigen::VectorXd v_lo, v_hi;
  Eigen::VectorXd x0_lo, x0_hi;

  static ConstraintSet unbounded(int n_a, int n_w, int p);
  bool empty() const { return state_lo.size() == 0 && w_lo.size() == 0; }
};

/// Physical dynamics augmented with the GP realization and, optionally, a
/// constant-dynamics hyperparameter state theta = length scale.
///
/// State layout   x_a = [x (n); x_gp (m_f); theta (0 or 1)]
/// Noise layout   w_a = [w (q); w_gp (m_f); w_theta (0 or 1)]
///
/// The latent force fed to the base dynamics is C_gp x_gp. When
/// hyper-augmented, the companion rows of the GP block are recomputed from
/// theta at every evaluation; theta is clamped at theta_min.
struct AugmentedModel {
  ContinuousModel base;
  GpPrior prior;
  SsmRealization gp;
  bool hyper_augmented = false;
  bool hyper_state_is_lambda = false; // treat theta as lambda, not length scale
  double theta_min = 1e-6;

  int m_f() const { return gp.dim(); }
  int n_a() const { return base.n + m_f() + (hyper_augmented ? 1 : 0); }
  int n_w() const { return base.q + m_f() + (hyper_augmented ? 1 : 0); }

  /// True when the augmented vector field is linear in (x_a, u, w_a).
  bool linear_dynamics() const {
    return base.linear.has_value() && !hyper_augmented;
  }

  double lambda_from_theta(double theta) const;

  void eval_dynamics(const Eigen::VectorXd& x_a, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& w_a,
                     Eigen::Ref<Eigen::VectorXd> dx_a) const;
  void eval_output(const Eigen::VectorXd& x_a, const Eigen::VectorXd& u,
                   Eigen::Ref<Eigen::VectorXd> y) const;

  double latent_force(const Eigen::VectorXd& x_a) const {
    return x_a(base.n);
  }
};

/// Augment a base model with the state-space realization of the prior.
AugmentedModel augment(const ContinuousModel& base, const GpPrior& prior);

/// Add the hyperparameter state. Throws if already hyper-augmented.
AugmentedModel augment_hyperparameter(const AugmentedModel& model);

/// Block system matrix [[A, G C_gp], [0, F]] of the augmented dynamics.
/// Requires a linear base and a fixed-hyperparameter model.
Eigen::MatrixXd augmented_system_matrix(const AugmentedModel& model);

/// Output matrix [C, 0] for linear bases.
Eigen::MatrixXd augmented_output_matrix(const AugmentedModel& model);

/// Map from w_a onto the augmented state derivative: blkdiag(E, I_mf, [1]).
Eigen::MatrixXd augmented_disturbance_map(const AugmentedModel& model);

} // namespace lfm
