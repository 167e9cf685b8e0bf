#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace lfm {

/// Matérn prior on a scalar latent force. The order p maps to smoothness
/// nu = p + 1/2; the process is p times mean-square differentiable.
/// Only p in {1, 2} admit the exact companion-form realization built here.
struct GpPrior {
  int matern_order = 1;         // p
  double length_scale = 1.0;    // ell, time units
  double signal_variance = 1.0; // sigma_f^2

  double nu() const { return matern_order + 0.5; }
  double lambda() const { return std::sqrt(2.0 * nu()) / length_scale; }
  void validate() const; // throws std::invalid_argument on bad fields
};

/// Linear SDE  dx = F x dt + L dW  whose first state has the prior's
/// stationary covariance. F is companion form, L = (0,..,0,1)^T,
/// C = (1,0,..,0), and q is the white-noise spectral density.
struct SsmRealization {
  Eigen::MatrixXd F;
  Eigen::VectorXd L;
  Eigen::RowVectorXd C;
  double q = 0.0;

  int dim() const { return static_cast<int>(F.rows()); }
};

/// Last row of the companion matrix for a given order and rate lambda:
/// p=1 -> (-lambda^2, -2 lambda), p=2 -> (-lambda^3, -3 lambda^2, -3 lambda).
Eigen::RowVectorXd companion_last_row(int matern_order, double lambda);

/// Realize the prior as a state-space model. q is fixed by requiring the
/// stationary variance of the first state to equal signal_variance, which
/// for Matérn kernels is the same as matching power spectral densities.
SsmRealization matern_ssm(const GpPrior& prior);

/// Unique PSD solution of F S + S F^T + L q L^T = 0. Requires F Hurwitz.
Eigen::MatrixXd stationary_covariance(const SsmRealization& ssm);

/// Power spectral density of the realization's output at frequency omega,
/// S(w) = C (F + jwI)^-1 L q L^T ((F - jwI)^-1)^T C^T.
double spectral_density(const SsmRealization& ssm, double omega);

/// Closed-form Matérn covariance k(tau).
double matern_covariance(const GpPrior& prior, double tau);

/// Closed-form Matérn power spectral density (Fourier pair of k).
double matern_spectral_density(const GpPrior& prior, double omega);

} // namespace lfm
