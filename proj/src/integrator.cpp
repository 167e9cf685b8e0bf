#include "lfm/integrator.hpp"

#include <stdexcept>

namespace lfm {

int default_substeps(double delta) { return delta <= 0.02 ? 1 : 4; }

PiecewiseSignal PiecewiseSignal::zero(const Grid& grid, int dim) {
  PiecewiseSignal s;
  s.grid = grid;
  s.values.assign(grid.n_intervals, Eigen::VectorXd::Zero(dim));
  return s;
}

void Rk4Workspace::resize(int n) {
  k1.resize(n);
  k2.resize(n);
  k3.resize(n);
  k4.resize(n);
  tmp.resize(n);
}

namespace {

void rk4_step_inplace(const AugmentedModel& model, Eigen::VectorXd& x,
                      const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                      double h, Rk4Workspace& s) {
  model.eval_dynamics(x, u, w, s.k1);
  s.tmp = x + 0.5 * h * s.k1;
  model.eval_dynamics(s.tmp, u, w, s.k2);
  s.tmp = x + 0.5 * h * s.k2;
  model.eval_dynamics(s.tmp, u, w, s.k3);
  s.tmp = x + h * s.k3;
  model.eval_dynamics(s.tmp, u, w, s.k4);
  x += (h / 6.0) * (s.k1 + 2.0 * s.k2 + 2.0 * s.k3 + s.k4);
  if (!x.allFinite()) throw std::runtime_error("integration blow-up");
}

const Eigen::VectorXd& signal_value(const PiecewiseSignal& sig, int interval,
                                    const Eigen::VectorXd& fallback) {
  if (sig.values.empty()) return fallback;
  return sig.values[static_cast<size_t>(interval)];
}

} // namespace

Eigen::VectorXd rk4_step(const AugmentedModel& model, const Eigen::VectorXd& x_a,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w_a,
                         double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  Rk4Workspace s;
  s.resize(model.n_a());
  Eigen::VectorXd x = x_a;
  rk4_step_inplace(model, x, u, w_a, h, s);
  return x;
}

void advance_interval(const AugmentedModel& model, Eigen::VectorXd& x,
                      const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                      double delta, int substeps, Rk4Workspace& ws) {
  const double h = delta / substeps;
  for (int i = 0; i < substeps; ++i) rk4_step_inplace(model, x, u, w, h, ws);
}

Eigen::VectorXd integrate_interval(const AugmentedModel& model,
                                   const Eigen::VectorXd& x_a,
                                   const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& w_a, double delta,
                                   int substeps) {
  Rk4Workspace s;
  s.resize(model.n_a());
  Eigen::VectorXd x = x_a;
  advance_interval(model, x, u, w_a, delta, substeps, s);
  return x;
}

std::vector<Eigen::VectorXd> simulate(const AugmentedModel& model,
                                      const Eigen::VectorXd& chi,
                                      const PiecewiseSignal& u,
                                      const PiecewiseSignal& w,
                                      const Grid& grid) {
  if (!u.values.empty() &&
      static_cast<int>(u.values.size()) != grid.n_intervals)
    throw std::invalid_argument("u signal not on grid");
  if (!w.values.empty() &&
      static_cast<int>(w.values.size()) != grid.n_intervals)
    throw std::invalid_argument("w signal not on grid");

  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(model.base.m_u);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(model.n_w());
  Rk4Workspace s;
  s.resize(model.n_a());
  const double h = grid.delta / grid.substeps;

  std::vector<Eigen::VectorXd> out;
  out.reserve(grid.nodes());
  out.push_back(chi);
  Eigen::VectorXd x = chi;
  for (int k = 0; k < grid.n_intervals; ++k) {
    const Eigen::VectorXd& uk = signal_value(u, k, u0);
    const Eigen::VectorXd& wk = signal_value(w, k, w0);
    for (int i = 0; i < grid.substeps; ++i)
      rk4_step_inplace(model, x, uk, wk, h, s);
    out.push_back(x);
  }
  return out;
}

TrajectoryJacobians trajectory_jacobians(const AugmentedModel& model,
                                         const Eigen::VectorXd& chi,
                                         const PiecewiseSignal& u,
                                         const PiecewiseSignal& w,
                                         const Grid& grid, bool central) {
  const int n_a = model.n_a();
  const int n_w = model.n_w();
  const int N = grid.n_intervals;
  const int dim = n_a + N * n_w;

  PiecewiseSignal wp = w;
  if (wp.values.empty()) wp = PiecewiseSignal::zero(grid, n_w);

  const std::vector<Eigen::VectorXd> base = simulate(model, chi, u, wp, grid);

  TrajectoryJacobians result;
  result.jac.assign(grid.nodes(), Eigen::MatrixXd::Zero(n_a, dim));

  auto fill_column = [&](int col, const Eigen::VectorXd& chi_p,
                         const PiecewiseSignal& w_p, double step,
                         const std::vector<Eigen::VectorXd>* minus) {
    const std::vector<Eigen::VectorXd> plus = simulate(model, chi_p, u, w_p, grid);
    for (int i = 0; i < grid.nodes(); ++i) {
      if (minus)
        result.jac[i].col(col) = (plus[i] - (*minus)[i]) / (2.0 * step);
      else
        result.jac[i].col(col) = (plus[i] - base[i]) / step;
    }
  };

  for (int j = 0; j < n_a; ++j) {
    const double step = 1e-6 * (1.0 + std::abs(chi(j)));
    Eigen::VectorXd chi_p = chi;
    chi_p(j) += step;
    if (central) {
      Eigen::VectorXd chi_m = chi;
      chi_m(j) -= step;
      const auto minus = simulate(model, chi_m, u, wp, grid);
      fill_column(j, chi_p, wp, step, &minus);
    } else {
      fill_column(j, chi_p, wp, step, nullptr);
    }
  }
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < n_w; ++j) {
      const int col = n_a + k * n_w + j;
      const double step = 1e-6 * (1.0 + std::abs(wp.values[k](j)));
      PiecewiseSignal w_p = wp;
      w_p.values[k](j) += step;
      if (central) {
        PiecewiseSignal w_m = wp;
        w_m.values[k](j) -= step;
        const auto minus = simulate(model, chi, u, w_m, grid);
        fill_column(col, chi, w_p, step, &minus);
      } else {
        fill_column(col, chi, w_p, step, nullptr);
      }
    }
  }
  return result;
}

StepLinearization step_with_jacobians(const AugmentedModel& model,
                                      const Eigen::VectorXd& x_a,
                                      const Eigen::VectorXd& u,
                                      const Eigen::VectorXd& w_a, double delta,
                                      int substeps, bool central) {
  const int n_a = model.n_a();
  const int n_w = model.n_w();
  StepLinearization lin;
  lin.x_next = integrate_interval(model, x_a, u, w_a, delta, substeps);
  lin.A.resize(n_a, n_a);
  lin.B.resize(n_a, n_w);

  for (int j = 0; j < n_a; ++j) {
    const double step = 1e-6 * (1.0 + std::abs(x_a(j)));
    Eigen::VectorXd xp = x_a;
    xp(j) += step;
    const Eigen::VectorXd plus = integrate_interval(model, xp, u, w_a, delta, substeps);
    if (central) {
      Eigen::VectorXd xm = x_a;
      xm(j) -= step;
      const Eigen::VectorXd minus =
          integrate_interval(model, xm, u, w_a, delta, substeps);
      lin.A.col(j) = (plus - minus) / (2.0 * step);
    } else {
      lin.A.col(j) = (plus - lin.x_next) / step;
    }
  }
  for (int j = 0; j < n_w; ++j) {
    const double step = 1e-6 * (1.0 + std::abs(w_a(j)));
    Eigen::VectorXd wp = w_a;
    wp(j) += step;
    const Eigen::VectorXd plus = integrate_interval(model, x_a, u, wp, delta, substeps);
    if (central) {
      Eigen::VectorXd wm = w_a;
      wm(j) -= step;
      const Eigen::VectorXd minus =
          integrate_interval(model, x_a, u, wm, delta, substeps);
      lin.B.col(j) = (plus - minus) / (2.0 * step);
    } else {
      lin.B.col(j) = (plus - lin.x_next) / step;
    }
  }
  return lin;
}

} // namespace lfm
