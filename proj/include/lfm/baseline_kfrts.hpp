#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "lfm/dynamics.hpp"

namespace lfm {

/// Discrete-time linear-Gaussian model x_{k+1} = Ad x_k + w_k,
/// y_k = C x_k + v_k, w ~ N(0, Qd), v ~ N(0, Rv), x_0 ~ N(m0, P0).
struct DiscreteLinearModel {
  Eigen::MatrixXd Ad, Qd;
  Eigen::MatrixXd C, Rv;
  Eigen::VectorXd m0;
  Eigen::MatrixXd P0;

  int dim() const { return static_cast<int>(Ad.rows()); }
};

struct SmoothingResult {
  std::vector<Eigen::VectorXd> filtered_mean;
  std::vector<Eigen::MatrixXd> filtered_cov;
  std::vector<Eigen::VectorXd> predicted_mean; // prior at step 0
  std::vector<Eigen::MatrixXd> predicted_cov;
  std::vector<Eigen::VectorXd> smoothed_mean;
  std::vector<Eigen::MatrixXd> smoothed_cov;
  double log_likelihood = 0.0;
};

/// Exact discretization of dx = A x + E w dt with white noise of spectral
/// density Sw, by the Van Loan matrix-exponential construction:
/// Ad = exp(A d), Qd = int_0^d exp(A s) E Sw E^T exp(A^T s) ds.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_lti(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& E,
    const Eigen::MatrixXd& Sw, double delta);

/// Discretization matching a piecewise-constant disturbance held over each
/// interval: Ad = exp(A d), Qd = Phi1 E Spc E^T Phi1^T with
/// Phi1 = int_0^d exp(A s) ds. Used when comparing against estimators that
/// parameterize the disturbance as interval-constant.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_pc(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& E,
    const Eigen::MatrixXd& Spc, double delta);

/// Input map Phi1 = int_0^d exp(A s) ds.
Eigen::MatrixXd lti_input_map(const Eigen::MatrixXd& A, double delta);

/// Forward pass. Measurements are one per node; the first update uses the
/// prior (m0, P0) directly. Accumulates the log marginal likelihood.
SmoothingResult kalman_filter(const DiscreteLinearModel& model,
                              const std::vector<Eigen::VectorXd>& ys);

/// Backward Rauch-Tung-Striebel pass over a completed filter result.
SmoothingResult rts_smoother(const DiscreteLinearModel& model,
                             SmoothingResult filtered);

struct LengthscaleSearch {
  double lo = 0.05;
  double hi = 20.0;
  int grid_points = 25;
  double tol = 1e-4; // relative golden-section width
};

/// Maximize the KF log marginal likelihood over the length scale.
/// model_for builds the discrete model for a candidate value; the search is
/// a log-spaced grid refined by golden section between the best neighbors.
double optimize_lengthscale_ml(
    const std::function<DiscreteLinearModel(double)>& model_for,
    const std::vector<Eigen::VectorXd>& ys, const LengthscaleSearch& search);

/// Discrete linear-Gaussian latent force model for a linear base and a
/// Matérn prior, with E_a = blkdiag(E, L) and Sw = diag(sigma_w^2.., q_gp).
/// The prior covariance is blkdiag(kappa I_n, stationary covariance).
DiscreteLinearModel lfm_discrete_model(const ContinuousModel& base,
                                       const GpPrior& prior,
                                       const Eigen::VectorXd& sigma_w_sq,
                                       double sigma_v_sq, double delta,
                                       double kappa,
                                       const Eigen::VectorXd& m0);

} // namespace lfm
