#include "lfm/ose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace lfm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_pd(const Eigen::MatrixXd& M, const char* name) {
  if (M.rows() != M.cols()) throw std::invalid_argument(std::string(name) + " must be square");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (M + M.transpose()));
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(std::string(name) + " must be positive definite");
}

enum RowKind { kStateLo, kStateHi, kOutLo, kOutHi, kNoiseLo, kNoiseHi };

struct ConRow {
  RowKind kind;
  int index;
  double bound;
};

// Single-shooting transcription shared by FIE and the dMHE windows. The
// measurement window and prior are mutable so the moving-horizon loop can
// reuse one context (and its linearization caches) for every window.
struct FieContext {
  AugmentedModel model;
  Grid grid;
  std::vector<Eigen::VectorXd> y; // nodes() measurements
  std::vector<Eigen::VectorXd> u; // per-interval values; empty = zero
  Eigen::MatrixXd Q, R, P;
  Eigen::VectorXd prior;
  ConstraintSet bounds;
  bool central = false;

  int n_a = 0, n_w = 0, p = 0, N = 0;
  std::vector<ConRow> node_rows; // identical pattern at every node
  Eigen::VectorXd u_zero;

  // One-interval step map for linear dynamics; exact, probed once.
  bool linear = false;
  Eigen::MatrixXd Ad, Bu, Bw;
  bool output_linear = false;
  Eigen::MatrixXd H_const;

  // Last evaluated trajectory, keyed by the exact decision vector.
  mutable Eigen::VectorXd z_memo;
  mutable std::vector<Eigen::VectorXd> traj_memo;
  mutable bool memo_valid = false;
  mutable Rk4Workspace ws;

  int dim() const { return n_a + N * n_w; }
  int rows_per_node() const { return static_cast<int>(node_rows.size()); }
  int num_constraints() const { return rows_per_node() * (N + 1); }

  const Eigen::VectorXd& u_at(int interval) const {
    if (u.empty()) return u_zero;
    return u[static_cast<size_t>(std::clamp(interval, 0, N - 1))];
  }

  void invalidate() { memo_valid = false; }

  const std::vector<Eigen::VectorXd>& nodes(const Eigen::VectorXd& z) const {
    if (memo_valid && z_memo.size() == z.size() && z_memo == z)
      return traj_memo;
    traj_memo.assign(1, z.head(n_a));
    traj_memo.reserve(N + 1);
    Eigen::VectorXd x = z.head(n_a);
    for (int k = 0; k < N; ++k) {
      const auto w = z.segment(n_a + k * n_w, n_w);
      if (linear) {
        Eigen::VectorXd xn = Ad * x;
        xn.noalias() += Bw * w;
        if (Bu.cols() > 0) xn.noalias() += Bu * u_at(k);
        x = std::move(xn);
      } else {
        advance_interval(model, x, u_at(k), w, grid.delta, grid.substeps, ws);
      }
      traj_memo.push_back(x);
    }
    z_memo = z;
    memo_valid = true;
    return traj_memo;
  }

  void output_at(const Eigen::VectorXd& x, int k,
                 Eigen::Ref<Eigen::VectorXd> yout) const {
    model.eval_output(x, u_at(k), yout);
  }

  Eigen::MatrixXd output_jacobian(const Eigen::VectorXd& x, int k) const {
    if (output_linear) return H_const;
    Eigen::MatrixXd H(p, n_a);
    Eigen::VectorXd y0(p), y1(p);
    output_at(x, k, y0);
    Eigen::VectorXd xp = x;
    for (int j = 0; j < n_a; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x(j)));
      xp(j) = x(j) + h;
      output_at(xp, k, y1);
      H.col(j) = (y1 - y0) / h;
      xp(j) = x(j);
    }
    return H;
  }

  double objective(const Eigen::VectorXd& z) const {
    // A diverging trajectory marks the point as unusable; the line search
    // backs off instead of aborting the solve.
    const std::vector<Eigen::VectorXd>* Xp = nullptr;
    try {
      Xp = &nodes(z);
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
    const auto& X = *Xp;
    Eigen::VectorXd d = z.head(n_a) - prior;
    double J = 2.0 * d.dot(P * d);
    for (int k = 0; k < N; ++k) {
      const auto w = z.segment(n_a + k * n_w, n_w);
      J += 2.0 * grid.delta * w.dot(Q * w);
    }
    Eigen::VectorXd yb(p);
    for (int k = 0; k <= N; ++k) {
      output_at(X[k], k, yb);
      const Eigen::VectorXd dy = y[k] - yb;
      J += dy.dot(R * dy);
    }
    return J;
  }

  void constraint_values(const Eigen::VectorXd& z,
                         Eigen::Ref<Eigen::VectorXd> g) const {
    const auto& X = nodes(z);
    const int rpn = rows_per_node();
    Eigen::VectorXd yb(p);
    bool need_output = false;
    for (const ConRow& r : node_rows)
      if (r.kind != kStateLo && r.kind != kStateHi) need_output = true;

    for (int k = 0; k <= N; ++k) {
      if (need_output) output_at(X[k], k, yb);
      for (int r = 0; r < rpn; ++r) {
        const ConRow& row = node_rows[r];
        double v = 0.0;
        switch (row.kind) {
          case kStateLo: v = row.bound - X[k](row.index); break;
          case kStateHi: v = X[k](row.index) - row.bound; break;
          case kOutLo: v = row.bound - yb(row.index); break;
          case kOutHi: v = yb(row.index) - row.bound; break;
          case kNoiseLo: v = row.bound - (y[k](row.index) - yb(row.index)); break;
          case kNoiseHi: v = (y[k](row.index) - yb(row.index)) - row.bound; break;
        }
        g(k * rpn + r) = v;
      }
    }
  }

  // Gradient of objective + c . g by one backward (adjoint) sweep. Per-step
  // Jacobians are exact for linear dynamics and finite-difference otherwise.
  void lagrangian_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& c,
                           Eigen::Ref<Eigen::VectorXd> out) const {
    const auto& X = nodes(z);
    const int rpn = rows_per_node();

    std::vector<Eigen::MatrixXd> As, Bs;
    if (!linear) {
      As.reserve(N);
      Bs.reserve(N);
      for (int k = 0; k < N; ++k) {
        StepLinearization lin = step_with_jacobians(
            model, X[k], u_at(k), z.segment(n_a + k * n_w, n_w), grid.delta,
            grid.substeps, central);
        As.push_back(std::move(lin.A));
        Bs.push_back(std::move(lin.B));
      }
    }

    Eigen::VectorXd yb(p);
    auto node_grad = [&](int k) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(n_a);
      output_at(X[k], k, yb);
      Eigen::VectorXd coef_y = -2.0 * (R * (y[k] - yb));
      for (int i = 0; i < rpn; ++i) {
        const double w = c(k * rpn + i);
        if (w == 0.0) continue;
        const ConRow& row = node_rows[i];
        switch (row.kind) {
          case kStateLo: r(row.index) -= w; break;
          case kStateHi: r(row.index) += w; break;
          case kOutLo: coef_y(row.index) -= w; break;
          case kOutHi: coef_y(row.index) += w; break;
          case kNoiseLo: coef_y(row.index) += w; break;
          case kNoiseHi: coef_y(row.index) -= w; break;
        }
      }
      const Eigen::MatrixXd H = output_jacobian(X[k], k);
      r.noalias() += H.transpose() * coef_y;
      return r;
    };

    Eigen::VectorXd lam = node_grad(N);
    for (int k = N - 1; k >= 0; --k) {
      const auto w = z.segment(n_a + k * n_w, n_w);
      const Eigen::MatrixXd& Bk = linear ? Bw : Bs[k];
      const Eigen::MatrixXd& Ak = linear ? Ad : As[k];
      out.segment(n_a + k * n_w, n_w) = 4.0 * grid.delta * (Q * w);
      out.segment(n_a + k * n_w, n_w).noalias() += Bk.transpose() * lam;
      Eigen::VectorXd lam_next = node_grad(k);
      lam_next.noalias() += Ak.transpose() * lam;
      lam = std::move(lam_next);
    }
    out.head(n_a) = 4.0 * (P * (z.head(n_a) - prior));
    out.head(n_a) += lam;
  }
};

ConstraintSet resolve_bounds(const AugmentedModel& model,
                             const EstimationConfig& cfg) {
  const int n_a = model.n_a();
  const int n_w = model.n_w();
  const int p = model.base.p;
  ConstraintSet b = cfg.constraints;
  // Unset fields stay unbounded; set fields must match the model.
  auto fill = [](Eigen::VectorXd& v, int dim, double value) {
    if (v.size() == 0) v = Eigen::VectorXd::Constant(dim, value);
  };
  fill(b.state_lo, n_a, -kInf);
  fill(b.state_hi, n_a, kInf);
  fill(b.w_lo, n_w, -kInf);
  fill(b.w_hi, n_w, kInf);
  fill(b.y_lo, p, -kInf);
  fill(b.y_hi, p, kInf);
  fill(b.v_lo, p, -kInf);
  fill(b.v_hi, p, kInf);
  fill(b.x0_lo, n_a, -kInf);
  fill(b.x0_hi, n_a, kInf);
  if (b.state_lo.size() != n_a || b.state_hi.size() != n_a ||
      b.w_lo.size() != n_w || b.w_hi.size() != n_w || b.y_lo.size() != p ||
      b.y_hi.size() != p || b.v_lo.size() != p || b.v_hi.size() != p ||
      b.x0_lo.size() != n_a || b.x0_hi.size() != n_a)
    throw std::invalid_argument("constraint set size mismatch");
  if (model.hyper_augmented) {
    const int ti = n_a - 1;
    b.state_lo(ti) = std::max({b.state_lo(ti), cfg.theta_lo, model.theta_min});
    b.state_hi(ti) = std::min(b.state_hi(ti), cfg.theta_hi);
    b.x0_lo(ti) = std::max({b.x0_lo(ti), cfg.theta_lo, model.theta_min});
    b.x0_hi(ti) = std::min(b.x0_hi(ti), cfg.theta_hi);
  }
  return b;
}

std::shared_ptr<FieContext> make_context(const AugmentedModel& model,
                                         std::vector<Eigen::VectorXd> y,
                                         const PiecewiseSignal& u,
                                         const EstimationConfig& cfg,
                                         const Eigen::VectorXd& prior_mean) {
  if (y.empty()) throw std::invalid_argument("no measurements");
  auto ctx = std::make_shared<FieContext>();
  ctx->model = model;
  ctx->n_a = model.n_a();
  ctx->n_w = model.n_w();
  ctx->p = model.base.p;
  ctx->N = static_cast<int>(y.size()) - 1;
  for (const auto& yk : y)
    if (yk.size() != ctx->p)
      throw std::invalid_argument("grid/measurement mismatch");
  if (!u.values.empty() && static_cast<int>(u.values.size()) < ctx->N)
    throw std::invalid_argument("grid/measurement mismatch");
  if (prior_mean.size() != ctx->n_a)
    throw std::invalid_argument("prior mean dimension");

  require_pd(cfg.Q, "Q");
  require_pd(cfg.R, "R");
  require_pd(cfg.P, "P");
  if (cfg.Q.rows() != ctx->n_w) throw std::invalid_argument("Q dimension");
  if (cfg.R.rows() != ctx->p) throw std::invalid_argument("R dimension");
  if (cfg.P.rows() != ctx->n_a) throw std::invalid_argument("P dimension");

  ctx->y = std::move(y);
  ctx->u.assign(u.values.begin(),
                u.values.begin() + (u.values.empty() ? 0 : ctx->N));
  ctx->Q = cfg.Q;
  ctx->R = cfg.R;
  ctx->P = cfg.P;
  ctx->prior = prior_mean;
  ctx->central = cfg.central_differences;
  ctx->grid.t0 = 0.0;
  ctx->grid.delta = cfg.delta;
  ctx->grid.n_intervals = ctx->N;
  ctx->grid.substeps = cfg.substeps > 0 ? cfg.substeps : default_substeps(cfg.delta);
  ctx->bounds = resolve_bounds(model, cfg);
  ctx->u_zero = Eigen::VectorXd::Zero(model.base.m_u);

  // Constraint rows; the same pattern at every node keeps the multiplier
  // layout uniform so dMHE can shift warm starts by whole nodes.
  for (int i = 0; i < ctx->n_a; ++i) {
    if (std::isfinite(ctx->bounds.state_lo(i)))
      ctx->node_rows.push_back({kStateLo, i, ctx->bounds.state_lo(i)});
    if (std::isfinite(ctx->bounds.state_hi(i)))
      ctx->node_rows.push_back({kStateHi, i, ctx->bounds.state_hi(i)});
  }
  for (int j = 0; j < ctx->p; ++j) {
    if (std::isfinite(ctx->bounds.y_lo(j)))
      ctx->node_rows.push_back({kOutLo, j, ctx->bounds.y_lo(j)});
    if (std::isfinite(ctx->bounds.y_hi(j)))
      ctx->node_rows.push_back({kOutHi, j, ctx->bounds.y_hi(j)});
    if (std::isfinite(ctx->bounds.v_lo(j)))
      ctx->node_rows.push_back({kNoiseLo, j, ctx->bounds.v_lo(j)});
    if (std::isfinite(ctx->bounds.v_hi(j)))
      ctx->node_rows.push_back({kNoiseHi, j, ctx->bounds.v_hi(j)});
  }

  ctx->linear = model.linear_dynamics();
  if (ctx->linear) {
    // Probe the one-interval RK4 map; superposition makes this exact.
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(ctx->n_a);
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(ctx->n_w);
    ctx->Ad.resize(ctx->n_a, ctx->n_a);
    ctx->Bw.resize(ctx->n_a, ctx->n_w);
    ctx->Bu.resize(ctx->n_a, model.base.m_u);
    for (int j = 0; j < ctx->n_a; ++j)
      ctx->Ad.col(j) = integrate_interval(model, Eigen::VectorXd::Unit(ctx->n_a, j),
                                          ctx->u_zero, w0, cfg.delta,
                                          ctx->grid.substeps);
    for (int j = 0; j < ctx->n_w; ++j)
      ctx->Bw.col(j) = integrate_interval(model, x0, ctx->u_zero,
                                          Eigen::VectorXd::Unit(ctx->n_w, j),
                                          cfg.delta, ctx->grid.substeps);
    for (int j = 0; j < model.base.m_u; ++j)
      ctx->Bu.col(j) = integrate_interval(model, x0,
                                          Eigen::VectorXd::Unit(model.base.m_u, j),
                                          w0, cfg.delta, ctx->grid.substeps);
  }
  ctx->output_linear = model.base.linear.has_value();
  if (ctx->output_linear) {
    ctx->H_const = Eigen::MatrixXd::Zero(ctx->p, ctx->n_a);
    ctx->H_const.leftCols(model.base.n) = model.base.linear->C;
  }
  ctx->ws.resize(ctx->n_a);
  return ctx;
}

NlpProblem problem_from_context(const std::shared_ptr<FieContext>& ctx) {
  NlpProblem nlp;
  nlp.dim = ctx->dim();
  nlp.lo.resize(nlp.dim);
  nlp.hi.resize(nlp.dim);
  nlp.lo.head(ctx->n_a) = ctx->bounds.x0_lo.cwiseMax(ctx->bounds.state_lo);
  nlp.hi.head(ctx->n_a) = ctx->bounds.x0_hi.cwiseMin(ctx->bounds.state_hi);
  for (int k = 0; k < ctx->N; ++k) {
    nlp.lo.segment(ctx->n_a + k * ctx->n_w, ctx->n_w) = ctx->bounds.w_lo;
    nlp.hi.segment(ctx->n_a + k * ctx->n_w, ctx->n_w) = ctx->bounds.w_hi;
  }
  nlp.objective = [ctx](const Eigen::VectorXd& z) { return ctx->objective(z); };
  nlp.num_constraints = ctx->num_constraints();
  nlp.constraints = [ctx](const Eigen::VectorXd& z,
                          Eigen::Ref<Eigen::VectorXd> g) {
    ctx->constraint_values(z, g);
  };
  nlp.lagrangian_gradient = [ctx](const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& c,
                                  Eigen::Ref<Eigen::VectorXd> out) {
    ctx->lagrangian_gradient(z, c, out);
  };
  return nlp;
}

Eigen::VectorXd initial_guess(const FieContext& ctx) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(ctx.dim());
  z.head(ctx.n_a) = ctx.prior;
  return z;
}

EstimateResult decode(const FieContext& ctx, const SolveReport& report,
                      double t0) {
  EstimateResult res;
  const auto& X = ctx.nodes(report.z);
  res.t.resize(ctx.N + 1);
  res.x_hat.assign(X.begin(), X.end());
  res.latent_force.resize(ctx.N + 1);
  for (int k = 0; k <= ctx.N; ++k) {
    res.t[k] = t0 + k * ctx.grid.delta;
    res.latent_force[k] = ctx.model.latent_force(X[k]);
  }
  res.w_hat.reserve(ctx.N);
  for (int k = 0; k < ctx.N; ++k)
    res.w_hat.push_back(report.z.segment(ctx.n_a + k * ctx.n_w, ctx.n_w));
  if (ctx.model.hyper_augmented) {
    res.theta_trace.resize(ctx.N + 1);
    for (int k = 0; k <= ctx.N; ++k) res.theta_trace[k] = X[k](ctx.n_a - 1);
  }
  res.window_reports.push_back(report);
  res.all_converged = report.converged;
  res.objective = report.objective;
  return res;
}

} // namespace

NlpProblem build_fie(const AugmentedModel& model,
                     const std::vector<Eigen::VectorXd>& y,
                     const PiecewiseSignal& u, const EstimationConfig& config,
                     const Eigen::VectorXd& prior_mean) {
  return problem_from_context(make_context(model, y, u, config, prior_mean));
}

EstimateResult estimate_fie(const AugmentedModel& model,
                            const std::vector<Eigen::VectorXd>& y,
                            const PiecewiseSignal& u,
                            const EstimationConfig& config,
                            const Eigen::VectorXd& prior_mean) {
  auto ctx = make_context(model, y, u, config, prior_mean);
  const NlpProblem nlp = problem_from_context(ctx);
  const SolveReport report = solve(nlp, initial_guess(*ctx), config.tol);
  return decode(*ctx, report, 0.0);
}

WindowData extract_window(const PiecewiseSignal& u,
                          const std::vector<Eigen::VectorXd>& y, int end_node,
                          int m_samples) {
  if (end_node < m_samples)
    throw std::invalid_argument("window start before data");
  if (end_node >= static_cast<int>(y.size()))
    throw std::invalid_argument("window end beyond data");
  WindowData win;
  win.y.assign(y.begin() + (end_node - m_samples), y.begin() + end_node + 1);
  win.u.grid = u.grid;
  win.u.grid.n_intervals = m_samples;
  if (!u.values.empty())
    win.u.values.assign(u.values.begin() + (end_node - m_samples),
                        u.values.begin() + end_node);
  return win;
}

EstimateResult estimate_dmhe(const AugmentedModel& model,
                             const std::vector<Eigen::VectorXd>& y,
                             const PiecewiseSignal& u,
                             const EstimationConfig& config,
                             const Eigen::VectorXd& prior_mean) {
  const int N = static_cast<int>(y.size()) - 1;
  if (N < 1) throw std::invalid_argument("no measurements");
  if (!(config.horizon > 0.0))
    throw std::invalid_argument("horizon must be positive");
  const int M = static_cast<int>(std::llround(config.horizon / config.delta));
  if (std::abs(M * config.delta - config.horizon) >
          1e-6 * std::max(1.0, config.horizon) ||
      M % 2 != 0 || M < 2)
    throw std::invalid_argument(
        "horizon must be an even integer multiple of the sampling time");
  if (M > N) throw std::invalid_argument("horizon exceeds data length");

  // One context is reused across windows; only measurements and the prior
  // change from one end node to the next.
  WindowData first = extract_window(u, y, M, M);
  auto ctx = make_context(model, first.y, first.u, config, prior_mean);
  const NlpProblem nlp = problem_from_context(ctx);
  const int rpn = ctx->rows_per_node();

  EstimateResult res;
  res.t.resize(N + 1);
  res.x_hat.assign(N + 1, Eigen::VectorXd());
  res.latent_force.assign(N + 1, 0.0);
  res.w_hat.assign(N, Eigen::VectorXd::Zero(ctx->n_w));
  if (model.hyper_augmented) res.theta_trace.assign(N + 1, 0.0);
  res.all_converged = true;
  res.window_reports.reserve(N - M + 1);

  Eigen::VectorXd z0 = initial_guess(*ctx);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(ctx->num_constraints());
  std::vector<Eigen::VectorXd> traj;

  auto fix_node = [&](int global, const Eigen::VectorXd& x,
                      int window_interval, const Eigen::VectorXd& z) {
    res.x_hat[global] = x;
    res.latent_force[global] = model.latent_force(x);
    if (model.hyper_augmented) res.theta_trace[global] = x(ctx->n_a - 1);
    if (global < N && window_interval < M)
      res.w_hat[global] = z.segment(ctx->n_a + window_interval * ctx->n_w, ctx->n_w);
  };

  for (int end = M; end <= N; ++end) {
    if (end > M) {
      WindowData win = extract_window(u, y, end, M);
      ctx->y = std::move(win.y);
      ctx->u = std::move(win.u.values);
      ctx->prior = res.x_hat[end - M];
      ctx->invalidate();
    }

    SolveReport report = solve(nlp, z0, config.tol, &mu);
    res.all_converged = res.all_converged && report.converged;
    traj = ctx->nodes(report.z);

    if (end == M)
      for (int j = 0; j <= M / 2; ++j) fix_node(j, traj[j], j, report.z);
    else
      fix_node(end - M / 2, traj[M / 2], M / 2, report.z);
    if (end == N)
      for (int j = M / 2 + 1; j <= M; ++j)
        fix_node(end - M + j, traj[j], j, report.z);

    // Shift the window solution and multipliers by one sample.
    z0.head(ctx->n_a) = traj[1];
    z0.segment(ctx->n_a, (M - 1) * ctx->n_w) =
        report.z.segment(ctx->n_a + ctx->n_w, (M - 1) * ctx->n_w);
    z0.tail(ctx->n_w).setZero();
    if (mu.size() > 0) {
      mu.head(M * rpn) = report.multipliers.tail(M * rpn);
      mu.tail(rpn).setZero();
    }

    res.window_reports.push_back(std::move(report));
  }

  for (int k = 0; k <= N; ++k) res.t[k] = k * config.delta;
  return res;
}

HyperLearnResult learn_then_freeze_hyperparameter(
    const AugmentedModel& model, const std::vector<Eigen::VectorXd>& y,
    const PiecewiseSignal& u, const EstimationConfig& config,
    const Eigen::VectorXd& prior_mean) {
  if (config.learn_samples < 2) throw std::invalid_argument("window too short");
  if (static_cast<int>(y.size()) < config.learn_samples)
    throw std::invalid_argument("window too short");

  const AugmentedModel hyper = augment_hyperparameter(model);
  const int n_w = model.n_w();
  const int n_a = model.n_a();

  EstimationConfig cfg = config;
  if (config.Q.rows() == n_w) {
    cfg.Q = Eigen::MatrixXd::Zero(n_w + 1, n_w + 1);
    cfg.Q.topLeftCorner(n_w, n_w) = config.Q;
    cfg.Q(n_w, n_w) = config.theta_q_weight;
  } else if (config.Q.rows() != hyper.n_w()) {
    throw std::invalid_argument("Q dimension");
  }
  if (config.P.rows() == n_a) {
    cfg.P = Eigen::MatrixXd::Zero(n_a + 1, n_a + 1);
    cfg.P.topLeftCorner(n_a, n_a) = config.P;
    cfg.P(n_a, n_a) = config.theta_p_weight;
  } else if (config.P.rows() != hyper.n_a()) {
    throw std::invalid_argument("P dimension");
  }
  if (!config.constraints.empty() &&
      config.constraints.state_lo.size() == n_a) {
    auto extend = [](const Eigen::VectorXd& v, double fill) {
      Eigen::VectorXd out(v.size() + 1);
      out.head(v.size()) = v;
      out(v.size()) = fill;
      return out;
    };
    ConstraintSet& b = cfg.constraints;
    b.state_lo = extend(b.state_lo, -kInf);
    b.state_hi = extend(b.state_hi, kInf);
    b.x0_lo = extend(b.x0_lo, -kInf);
    b.x0_hi = extend(b.x0_hi, kInf);
    b.w_lo = extend(b.w_lo, -kInf);
    b.w_hi = extend(b.w_hi, kInf);
  }

  Eigen::VectorXd prior = prior_mean;
  if (prior.size() == n_a) {
    prior.conservativeResize(n_a + 1);
    prior(n_a) = config.theta_initial;
  }

  std::vector<Eigen::VectorXd> y_learn(y.begin(),
                                       y.begin() + config.learn_samples);
  PiecewiseSignal u_learn = u;
  if (!u.values.empty()) {
    u_learn.values.assign(u.values.begin(),
                          u.values.begin() + (config.learn_samples - 1));
    u_learn.grid.n_intervals = config.learn_samples - 1;
  }

  HyperLearnResult out;
  out.learn_estimate = estimate_fie(hyper, y_learn, u_learn, cfg, prior);

  double theta = out.learn_estimate.theta_trace.back();
  theta = std::clamp(theta, cfg.theta_lo, cfg.theta_hi);
  GpPrior frozen = model.prior;
  frozen.length_scale = hyper.hyper_state_is_lambda
                            ? std::sqrt(2.0 * frozen.nu()) / std::max(theta, hyper.theta_min)
                            : theta;
  out.frozen_length_scale = frozen.length_scale;
  out.frozen_model = augment(model.base, frozen);
  out.frozen_model.hyper_state_is_lambda = model.hyper_state_is_lambda;
  out.frozen_model.theta_min = model.theta_min;

  // Flag windows whose residuals stay far above the level implied by R.
  double resid_ms = 0.0;
  Eigen::VectorXd yb(model.base.p);
  for (int k = 0; k < config.learn_samples; ++k) {
    hyper.eval_output(out.learn_estimate.x_hat[k],
                      Eigen::VectorXd::Zero(model.base.m_u), yb);
    resid_ms += (y_learn[k] - yb).squaredNorm();
  }
  resid_ms /= config.learn_samples * model.base.p;
  const double implied_var =
      (Eigen::VectorXd::Ones(model.base.p).array() /
       config.R.diagonal().array()).mean();
  out.low_confidence = resid_ms > 4.0 * implied_var;
  return out;
}

} // namespace lfm
