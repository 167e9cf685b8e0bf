#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lfm/dynamics.hpp"
#include "lfm/integrator.hpp"
#include "lfm/nlp_solver.hpp"

namespace lfm {

/// Weights and options shared by full-information and delayed moving
/// horizon estimation. Q weighs the disturbance w_a (n_w x n_w), R the
/// output residual (p x p), P the initial-state prior (n_a x n_a); all must
/// be positive definite. horizon is the window length M in time units and
/// must be an even integer multiple of delta.
struct EstimationConfig {
  Eigen::MatrixXd Q, R, P;
  double delta = 0.01;
  double horizon = 0.0;
  ConstraintSet constraints; // empty means unbounded
  int learn_samples = 0;
  SolveTolerances tol;
  int substeps = 0; // 0 picks the delta-based default
  bool central_differences = false;

  // Hyperparameter-state settings (hyper-augmented models only).
  double theta_initial = 1.0;
  double theta_lo = 1e-2;
  double theta_hi = 50.0;
  double theta_q_weight = 1.0; // appended to Q when the model gains theta
  double theta_p_weight = 1e-2;
};

struct EstimateResult {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x_hat;   // node states, n_a each
  std::vector<double> latent_force;     // C_gp x_gp per node
  std::vector<Eigen::VectorXd> w_hat;   // per-interval disturbances
  std::vector<double> theta_trace;      // per node, hyper models only
  std::vector<SolveReport> window_reports;
  bool all_converged = false;
  double objective = 0.0;
};

/// Transcribe the full-information problem: decision vector
/// z = [chi; w_0; ...; w_{N-1}], dynamics eliminated by single shooting,
/// cost Gamma(chi) + sum_k 2 delta |w_k|_Q^2 + sum_k |y_k - ybar_k|_R^2,
/// state/output/noise bounds as inequality rows at every node, initial and
/// disturbance bounds as the box.
NlpProblem build_fie(const AugmentedModel& model,
                     const std::vector<Eigen::VectorXd>& y,
                     const PiecewiseSignal& u, const EstimationConfig& config,
                     const Eigen::VectorXd& prior_mean);

/// Solve the full-information problem from the documented initial guess
/// (chi = prior, w = 0). Non-convergence is flagged, not thrown.
EstimateResult estimate_fie(const AugmentedModel& model,
                            const std::vector<Eigen::VectorXd>& y,
                            const PiecewiseSignal& u,
                            const EstimationConfig& config,
                            const Eigen::VectorXd& prior_mean);

/// Window signals for the horizon ending at node end_node: u over the
/// window's m_samples intervals, measurements at its m_samples+1 nodes.
struct WindowData {
  PiecewiseSignal u;
  std::vector<Eigen::VectorXd> y;
};
WindowData extract_window(const PiecewiseSignal& u,
                          const std::vector<Eigen::VectorXd>& y, int end_node,
                          int m_samples);

/// Delayed moving horizon estimation: solve the window problem for every
/// end node t_i in [M, T], fix the estimate at the window midpoint, stitch
/// head and tail segments from the first and last windows. Window failures
/// are flagged in the per-window reports and estimation continues with the
/// best iterate.
EstimateResult estimate_dmhe(const AugmentedModel& model,
                             const std::vector<Eigen::VectorXd>& y,
                             const PiecewiseSignal& u,
                             const EstimationConfig& config,
                             const Eigen::VectorXd& prior_mean);

struct HyperLearnResult {
  double frozen_length_scale = 0.0;
  bool low_confidence = false;
  EstimateResult learn_estimate;
  AugmentedModel frozen_model;
};

/// Estimate the length scale on the first learn_samples measurements with
/// the hyper-augmented model, freeze it to the final theta estimate, and
/// return a fixed-hyperparameter model for the remaining horizon.
HyperLearnResult learn_then_freeze_hyperparameter(
    const AugmentedModel& model, const std::vector<Eigen::VectorXd>& y,
    const PiecewiseSignal& u, const EstimationConfig& config,
    const Eigen::VectorXd& prior_mean);

} // namespace lfm
