#include "lfm/dynamics.hpp"

#include <limits>
#include <stdexcept>

namespace lfm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ContinuousModel linear_model(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const Eigen::MatrixXd& G, const Eigen::MatrixXd& E,
                             const Eigen::MatrixXd& C) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw std::invalid_argument("A must be square");
  if (B.size() > 0 && B.rows() != n) throw std::invalid_argument("B row count");
  if (G.rows() != n || G.cols() != 1)
    throw std::invalid_argument("G must be n x 1");
  if (E.rows() != n) throw std::invalid_argument("E row count");
  if (C.cols() != n) throw std::invalid_argument("C column count");

  ContinuousModel model;
  model.n = n;
  model.m_u = static_cast<int>(B.cols());
  model.p = static_cast<int>(C.rows());
  model.q = static_cast<int>(E.cols());
  model.E = E;
  model.linear = LinearParts{A, B, G, C};
  model.f = [A, B, G](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      double ell, Eigen::Ref<Eigen::VectorXd> dx) {
    dx.noalias() = A * x;
    if (u.size() > 0) dx.noalias() += B * u;
    dx.noalias() += G.col(0) * ell;
  };
  model.h = [C](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                Eigen::Ref<Eigen::VectorXd> y) { y.noalias() = C * x; };
  return model;
}

ConstraintSet ConstraintSet::unbounded(int n_a, int n_w, int p) {
  ConstraintSet c;
  c.state_lo = Eigen::VectorXd::Constant(n_a, -kInf);
  c.state_hi = Eigen::VectorXd::Constant(n_a, kInf);
  c.w_lo = Eigen::VectorXd::Constant(n_w, -kInf);
  c.w_hi = Eigen::VectorXd::Constant(n_w, kInf);
  c.y_lo = Eigen::VectorXd::Constant(p, -kInf);
  c.y_hi = Eigen::VectorXd::Constant(p, kInf);
  c.v_lo = Eigen::VectorXd::Constant(p, -kInf);
  c.v_hi = Eigen::VectorXd::Constant(p, kInf);
  c.x0_lo = Eigen::VectorXd::Constant(n_a, -kInf);
  c.x0_hi = Eigen::VectorXd::Constant(n_a, kInf);
  return c;
}

double AugmentedModel::lambda_from_theta(double theta) const {
  const double t = std::max(theta, theta_min);
  if (hyper_state_is_lambda) return t;
  return std::sqrt(2.0 * prior.nu()) / t;
}

void AugmentedModel::eval_dynamics(const Eigen::VectorXd& x_a,
                                   const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& w_a,
                                   Eigen::Ref<Eigen::VectorXd> dx_a) const {
  const int n = base.n;
  const int mf = m_f();
  if (x_a.size() != n_a() || w_a.size() != n_w() || dx_a.size() != n_a())
    throw std::invalid_argument("dimension mismatch");

  const double ell = x_a(n);
  base.f(x_a.head(n), u, ell, dx_a.head(n));
  dx_a.head(n).noalias() += base.E * w_a.head(base.q);

  const auto x_gp = x_a.segment(n, mf);
  if (!hyper_augmented) {
    dx_a.segment(n, mf).noalias() = gp.F * x_gp;
    dx_a.segment(n, mf) += w_a.segment(base.q, mf);
  } else {
    const double lam = lambda_from_theta(x_a(n + mf));
    for (int i = 0; i + 1 < mf; ++i)
      dx_a(n + i) = x_gp(i + 1) + w_a(base.q + i);
    dx_a(n + mf - 1) =
        companion_last_row(prior.matern_order, lam).dot(x_gp) +
        w_a(base.q + mf - 1);
    dx_a(n + mf) = w_a(base.q + mf); // theta' = w_theta
  }
}

void AugmentedModel::eval_output(const Eigen::VectorXd& x_a,
                                 const Eigen::VectorXd& u,
                                 Eigen::Ref<Eigen::VectorXd> y) const {
  if (x_a.size() != n_a() || y.size() != base.p)
    throw std::invalid_argument("dimension mismatch");
  base.h(x_a.head(base.n), u, y);
}

AugmentedModel augment(const ContinuousModel& base, const GpPrior& prior) {
  prior.validate();
  AugmentedModel model;
  model.base = base;
  model.prior = prior;
  model.gp = matern_ssm(prior);
  return model;
}

AugmentedModel augment_hyperparameter(const AugmentedModel& model) {
  if (model.hyper_augmented)
    throw std::invalid_argument("already hyper-augmented");
  AugmentedModel out = model;
  out.hyper_augmented = true;
  return out;
}

Eigen::MatrixXd augmented_system_matrix(const AugmentedModel& model) {
  if (!model.base.linear)
    throw std::invalid_argument("augmented_system_matrix requires a linear base");
  if (model.hyper_augmented)
    throw std::invalid_argument("hyper-augmented model is not linear");
  const int n = model.base.n;
  const int mf = model.m_f();
  Eigen::MatrixXd Aa = Eigen::MatrixXd::Zero(n + mf, n + mf);
  Aa.topLeftCorner(n, n) = model.base.linear->A;
  Aa.topRightCorner(n, mf).noalias() = model.base.linear->G * model.gp.C;
  Aa.bottomRightCorner(mf, mf) = model.gp.F;
  return Aa;
}

Eigen::MatrixXd augmented_output_matrix(const AugmentedModel& model) {
  if (!model.base.linear)
    throw std::invalid_argument("augmented_output_matrix requires a linear base");
  Eigen::MatrixXd Ca = Eigen::MatrixXd::Zero(model.base.p, model.n_a());
  Ca.leftCols(model.base.n) = model.base.linear->C;
  return Ca;
}

Eigen::MatrixXd augmented_disturbance_map(const AugmentedModel& model) {
  const int n = model.base.n;
  const int mf = model.m_f();
  Eigen::MatrixXd Ea = Eigen::MatrixXd::Zero(model.n_a(), model.n_w());
  Ea.topLeftCorner(n, model.base.q) = model.base.E;
  Ea.block(n, model.base.q, mf, mf).setIdentity();
  if (model.hyper_augmented) Ea(n + mf, model.base.q + mf) = 1.0;
  return Ea;
}

} // namespace lfm
