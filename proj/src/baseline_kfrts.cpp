#include "lfm/baseline_kfrts.hpp"

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace lfm {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

} // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_lti(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& E,
    const Eigen::MatrixXd& Sw, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const int n = static_cast<int>(A.rows());
  const Eigen::MatrixXd W = E * Sw * E.transpose();

  // Van Loan: exp([[-A, W], [0, A^T]] d) = [[., M12], [0, M22]],
  // Ad = M22^T, Qd = Ad M12.
  Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  blk.topLeftCorner(n, n) = -A;
  blk.topRightCorner(n, n) = W;
  blk.bottomRightCorner(n, n) = A.transpose();
  const Eigen::MatrixXd e = (blk * delta).exp();
  if (!e.allFinite()) throw std::runtime_error("non-finite matrix exponential");

  const Eigen::MatrixXd Ad = e.bottomRightCorner(n, n).transpose();
  const Eigen::MatrixXd Qd = symmetrize(Ad * e.topRightCorner(n, n));
  return {Ad, Qd};
}

Eigen::MatrixXd lti_input_map(const Eigen::MatrixXd& A, double delta) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  blk.topLeftCorner(n, n) = A;
  blk.topRightCorner(n, n).setIdentity();
  const Eigen::MatrixXd e = (blk * delta).exp();
  return e.topRightCorner(n, n);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_pc(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& E,
    const Eigen::MatrixXd& Spc, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const Eigen::MatrixXd Ad = (A * delta).exp();
  if (!Ad.allFinite()) throw std::runtime_error("non-finite matrix exponential");
  const Eigen::MatrixXd G = lti_input_map(A, delta) * E;
  return {Ad, symmetrize(G * Spc * G.transpose())};
}

SmoothingResult kalman_filter(const DiscreteLinearModel& model,
                              const std::vector<Eigen::VectorXd>& ys) {
  if (ys.empty()) throw std::invalid_argument("no measurements");
  const int N = static_cast<int>(ys.size());

  SmoothingResult r;
  r.filtered_mean.reserve(N);
  r.filtered_cov.reserve(N);
  r.predicted_mean.reserve(N);
  r.predicted_cov.reserve(N);

  Eigen::VectorXd m = model.m0;
  Eigen::MatrixXd P = model.P0;
  const double log2pi = std::log(2.0 * M_PI);

  for (int k = 0; k < N; ++k) {
    if (k > 0) {
      m = model.Ad * m;
      P = symmetrize(model.Ad * P * model.Ad.transpose() + model.Qd);
    }
    r.predicted_mean.push_back(m);
    r.predicted_cov.push_back(P);

    const Eigen::VectorXd e = ys[k] - model.C * m;
    const Eigen::MatrixXd S =
        symmetrize(model.C * P * model.C.transpose() + model.Rv);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    const double det = S.determinant();
    if (ldlt.info() != Eigen::Success || !(det > 0.0))
      throw std::runtime_error("degenerate innovation");

    const Eigen::MatrixXd K = ldlt.solve(model.C * P).transpose();
    m += K * e;
    // Joseph form keeps P symmetric PSD even with nearly flat priors.
    const Eigen::MatrixXd IKC =
        Eigen::MatrixXd::Identity(P.rows(), P.cols()) - K * model.C;
    P = symmetrize(IKC * P * IKC.transpose() + K * model.Rv * K.transpose());
    r.log_likelihood +=
        -0.5 * (e.size() * log2pi + std::log(det) + e.dot(ldlt.solve(e)));

    r.filtered_mean.push_back(m);
    r.filtered_cov.push_back(P);
  }
  return r;
}

SmoothingResult rts_smoother(const DiscreteLinearModel& model,
                             SmoothingResult filtered) {
  const int N = static_cast<int>(filtered.filtered_mean.size());
  if (N == 0) throw std::invalid_argument("empty filter output");

  SmoothingResult r = std::move(filtered);
  r.smoothed_mean.assign(N, Eigen::VectorXd());
  r.smoothed_cov.assign(N, Eigen::MatrixXd());
  r.smoothed_mean[N - 1] = r.filtered_mean[N - 1];
  r.smoothed_cov[N - 1] = r.filtered_cov[N - 1];

  for (int k = N - 2; k >= 0; --k) {
    const Eigen::MatrixXd& Pp = r.predicted_cov[k + 1];
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Pp);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("singular predicted covariance");
    const Eigen::MatrixXd G =
        ldlt.solve(model.Ad * r.filtered_cov[k]).transpose();
    r.smoothed_mean[k] =
        r.filtered_mean[k] + G * (r.smoothed_mean[k + 1] - r.predicted_mean[k + 1]);
    r.smoothed_cov[k] = symmetrize(
        r.filtered_cov[k] +
        G * (r.smoothed_cov[k + 1] - Pp) * G.transpose());
  }
  return r;
}

double optimize_lengthscale_ml(
    const std::function<DiscreteLinearModel(double)>& model_for,
    const std::vector<Eigen::VectorXd>& ys, const LengthscaleSearch& search) {
  if (ys.size() < 2) throw std::invalid_argument("window too short");

  const auto loglik = [&](double ell) {
    return kalman_filter(model_for(ell), ys).log_likelihood;
  };

  // Log-spaced grid, then golden section between the best point's neighbors.
  const double llo = std::log(search.lo), lhi = std::log(search.hi);
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<double> grid(search.grid_points);
  for (int i = 0; i < search.grid_points; ++i) {
    grid[i] = std::exp(llo + (lhi - llo) * i / (search.grid_points - 1));
    const double v = loglik(grid[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }

  double a = std::log(grid[std::max(0, best - 1)]);
  double b = std::log(grid[std::min(search.grid_points - 1, best + 1)]);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = loglik(std::exp(x1));
  double f2 = loglik(std::exp(x2));
  while (b - a > search.tol) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = loglik(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = loglik(std::exp(x2));
    }
  }
  const double refined = std::exp(0.5 * (a + b));
  return loglik(refined) >= best_val ? refined : grid[best];
}

DiscreteLinearModel lfm_discrete_model(const ContinuousModel& base,
                                       const GpPrior& prior,
                                       const Eigen::VectorXd& sigma_w_sq,
                                       double sigma_v_sq, double delta,
                                       double kappa,
                                       const Eigen::VectorXd& m0) {
  if (!base.linear)
    throw std::invalid_argument("lfm_discrete_model requires a linear base");
  const AugmentedModel aug = augment(base, prior);
  const int n = base.n;
  const int mf = aug.m_f();
  const int na = n + mf;

  const Eigen::MatrixXd Aa = augmented_system_matrix(aug);
  Eigen::MatrixXd Ea = Eigen::MatrixXd::Zero(na, base.q + 1);
  Ea.topLeftCorner(n, base.q) = base.E;
  Ea.block(n, base.q, mf, 1) = aug.gp.L;
  Eigen::MatrixXd Sw = Eigen::MatrixXd::Zero(base.q + 1, base.q + 1);
  Sw.topLeftCorner(base.q, base.q) = sigma_w_sq.asDiagonal();
  Sw(base.q, base.q) = aug.gp.q;

  DiscreteLinearModel model;
  std::tie(model.Ad, model.Qd) = discretize_lti(Aa, Ea, Sw, delta);
  model.C = augmented_output_matrix(aug);
  model.Rv = sigma_v_sq * Eigen::MatrixXd::Identity(base.p, base.p);
  model.m0 = m0.size() ? m0 : Eigen::VectorXd::Zero(na);
  model.P0 = Eigen::MatrixXd::Zero(na, na);
  model.P0.topLeftCorner(n, n) = kappa * Eigen::MatrixXd::Identity(n, n);
  model.P0.bottomRightCorner(mf, mf) = stationary_covariance(aug.gp);
  return model;
}

} // namespace lfm
