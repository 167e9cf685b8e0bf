#include "lfm/gp_ssm.hpp"

#include <Eigen/Eigenvalues>
#include <complex>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>

namespace lfm {

void GpPrior::validate() const {
  if (matern_order != 1 && matern_order != 2)
    throw std::invalid_argument("unsupported Matérn order");
  if (!(length_scale > 0.0))
    throw std::invalid_argument("length_scale must be positive");
  if (!(signal_variance > 0.0))
    throw std::invalid_argument("signal_variance must be positive");
}

Eigen::RowVectorXd companion_last_row(int matern_order, double lambda) {
  // Coefficients of (s + lambda)^(p+1), highest order normalized away.
  if (matern_order == 1) {
    Eigen::RowVectorXd r(2);
    r << -lambda * lambda, -2.0 * lambda;
    return r;
  }
  if (matern_order == 2) {
    Eigen::RowVectorXd r(3);
    r << -lambda * lambda * lambda, -3.0 * lambda * lambda, -3.0 * lambda;
    return r;
  }
  throw std::invalid_argument("unsupported Matérn order");
}

SsmRealization matern_ssm(const GpPrior& prior) {
  prior.validate();
  const int m = prior.matern_order + 1;

  SsmRealization ssm;
  ssm.F = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) ssm.F(i, i + 1) = 1.0;
  ssm.F.row(m - 1) = companion_last_row(prior.matern_order, prior.lambda());
  ssm.L = Eigen::VectorXd::Zero(m);
  ssm.L(m - 1) = 1.0;
  ssm.C = Eigen::RowVectorXd::Zero(m);
  ssm.C(0) = 1.0;

  // Solve the Lyapunov equation with unit density, then scale q so that
  // Var(first state) = signal_variance.
  ssm.q = 1.0;
  const double unit_variance = stationary_covariance(ssm)(0, 0);
  ssm.q = prior.signal_variance / unit_variance;
  return ssm;
}

Eigen::MatrixXd stationary_covariance(const SsmRealization& ssm) {
  const int m = ssm.dim();
  const Eigen::VectorXcd eigs = ssm.F.eigenvalues();
  if (eigs.real().maxCoeff() >= 0.0)
    throw std::runtime_error("unstable realization");

  // Vectorized linear solve on the m^2 unknowns:
  // (I (x) F + F (x) I) vec(S) = -vec(L q L^T).
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd lhs =
      Eigen::kroneckerProduct(I, ssm.F) + Eigen::kroneckerProduct(ssm.F, I);
  const Eigen::MatrixXd W = ssm.L * ssm.q * ssm.L.transpose();
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(W.data(), m * m);
  Eigen::VectorXd s = lhs.fullPivLu().solve(rhs);
  Eigen::MatrixXd S = Eigen::Map<Eigen::MatrixXd>(s.data(), m, m);
  return 0.5 * (S + S.transpose());
}

double spectral_density(const SsmRealization& ssm, double omega) {
  using Cplx = std::complex<double>;
  const int m = ssm.dim();
  const Eigen::MatrixXcd jwI =
      Cplx(0.0, omega) * Eigen::MatrixXcd::Identity(m, m);
  const Eigen::MatrixXcd Fc = ssm.F.cast<Cplx>();

  const Eigen::VectorXcd a = (Fc + jwI).fullPivLu().solve(ssm.L.cast<Cplx>());
  const Eigen::VectorXcd b =
      (Fc.transpose() - jwI).fullPivLu().solve(ssm.C.transpose().cast<Cplx>());
  const Cplx s = (ssm.C.cast<Cplx>() * a).value() * ssm.q *
                 (ssm.L.transpose().cast<Cplx>() * b).value();
  if (!std::isfinite(s.real())) throw std::runtime_error("resonant frequency");
  return s.real();
}

double matern_covariance(const GpPrior& prior, double tau) {
  prior.validate();
  const double lt = prior.lambda() * std::abs(tau);
  if (prior.matern_order == 1)
    return prior.signal_variance * (1.0 + lt) * std::exp(-lt);
  return prior.signal_variance * (1.0 + lt + lt * lt / 3.0) * std::exp(-lt);
}

double matern_spectral_density(const GpPrior& prior, double omega) {
  prior.validate();
  const double lam = prior.lambda();
  const double d = lam * lam + omega * omega;
  if (prior.matern_order == 1)
    return 4.0 * prior.signal_variance * std::pow(lam, 3) / (d * d);
  return (16.0 / 3.0) * prior.signal_variance * std::pow(lam, 5) / (d * d * d);
}

} // namespace lfm
