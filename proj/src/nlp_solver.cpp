#include "lfm/nlp_solver.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace lfm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box {
  Eigen::VectorXd lo, hi;

  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    return z.cwiseMax(lo).cwiseMin(hi);
  }
};

// Limited-memory BFGS pairs with the standard two-loop recursion.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(int capacity) : capacity_(capacity) {}

  void clear() { pairs_.clear(); }

  void push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const double sy = s.dot(y);
    if (sy <= 1e-12 * s.norm() * y.norm()) return; // keep curvature positive
    if (static_cast<int>(pairs_.size()) == capacity_) pairs_.pop_front();
    pairs_.push_back({s, y, 1.0 / sy});
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& grad) const {
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(pairs_.size());
    for (int i = static_cast<int>(pairs_.size()) - 1; i >= 0; --i) {
      alpha[i] = pairs_[i].rho * pairs_[i].s.dot(q);
      q -= alpha[i] * pairs_[i].y;
    }
    if (!pairs_.empty()) {
      const auto& last = pairs_.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (size_t i = 0; i < pairs_.size(); ++i) {
      const double beta = pairs_[i].rho * pairs_[i].y.dot(q);
      q += (alpha[i] - beta) * pairs_[i].s;
    }
    return q;
  }

  bool empty() const { return pairs_.empty(); }

 private:
  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  int capacity_;
  std::deque<Pair> pairs_;
};

struct InnerResult {
  Eigen::VectorXd z;
  double pg_norm = kInf;
  int iterations = 0;
  bool converged = false;
  bool blew_up = false;
};

// Projected L-BFGS descent with Armijo backtracking (step halving).
InnerResult minimize_inner(const std::function<double(const Eigen::VectorXd&)>& value,
                           const std::function<void(const Eigen::VectorXd&,
                                                    Eigen::Ref<Eigen::VectorXd>)>& grad,
                           const Box& box, Eigen::VectorXd z,
                           const SolveTolerances& tol) {
  InnerResult res;
  LbfgsMemory mem(tol.lbfgs_memory);
  Eigen::VectorXd g(z.size()), g_new(z.size());

  double f = value(z);
  if (!std::isfinite(f)) {
    res.z = std::move(z);
    res.blew_up = true;
    return res;
  }
  grad(z, g);

  auto pg_norm = [&](const Eigen::VectorXd& zz, const Eigen::VectorXd& gg) {
    return (zz - box.project(zz - gg)).cwiseAbs().maxCoeff();
  };

  for (int it = 0; it < tol.max_inner; ++it) {
    res.pg_norm = pg_norm(z, g);
    if (res.pg_norm <= tol.eps_opt) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = -mem.apply(g);
    bool steepest = mem.empty();
    if (!steepest && g.dot(d) > -1e-12 * g.norm() * d.norm()) {
      d = -g; // quasi-Newton direction unusable
      mem.clear();
      steepest = true;
    }

    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd z_new;
    double f_new = f;
    for (int ls = 0; ls < 40; ++ls) {
      z_new = box.project(z + alpha * d);
      const Eigen::VectorXd step = z_new - z;
      if (step.cwiseAbs().maxCoeff() == 0.0) break;
      f_new = value(z_new);
      if (std::isfinite(f_new) && f_new <= f + tol.armijo_c * g.dot(step)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!steepest) {
        // Retry from the raw gradient before giving up.
        mem.clear();
        continue;
      }
      break;
    }

    grad(z_new, g_new);
    mem.push(z_new - z, g_new - g);
    z = std::move(z_new);
    g = g_new;
    f = f_new;
    res.iterations = it + 1;
  }

  res.pg_norm = pg_norm(z, g);
  if (res.pg_norm <= tol.eps_opt) res.converged = true;
  res.z = std::move(z);
  return res;
}

} // namespace

SolveReport solve(const NlpProblem& problem, const Eigen::VectorXd& z0,
                  const SolveTolerances& tol, const Eigen::VectorXd* mu0) {
  if (problem.dim <= 0 || !problem.objective)
    throw std::invalid_argument("ill-formed problem");
  if (z0.size() != problem.dim) throw std::invalid_argument("z0 dimension");

  Box box;
  box.lo = problem.lo.size() ? problem.lo
                             : Eigen::VectorXd::Constant(problem.dim, -kInf);
  box.hi = problem.hi.size() ? problem.hi
                             : Eigen::VectorXd::Constant(problem.dim, kInf);
  if ((box.lo.array() > box.hi.array()).any())
    throw std::invalid_argument("box bounds crossed");

  const int m = problem.num_constraints;
  Eigen::VectorXd mu = (mu0 && mu0->size() == m) ? *mu0
                                                 : Eigen::VectorXd::Zero(m);
  double rho = tol.rho0;

  Eigen::VectorXd g_work(std::max(m, 1));
  auto eval_g = [&](const Eigen::VectorXd& z) -> const Eigen::VectorXd& {
    problem.constraints(z, g_work.head(m));
    return g_work;
  };

  // Augmented-Lagrangian value: f + sum((max(0, mu + rho g)^2 - mu^2) / 2rho).
  auto al_value = [&](const Eigen::VectorXd& z) {
    double v = problem.objective(z);
    if (m == 0 || !std::isfinite(v)) return v;
    const Eigen::VectorXd& g = eval_g(z);
    for (int i = 0; i < m; ++i) {
      const double t = std::max(0.0, mu(i) + rho * g(i));
      v += (t * t - mu(i) * mu(i)) / (2.0 * rho);
    }
    return v;
  };

  auto al_weights = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
    if (m > 0) {
      const Eigen::VectorXd& g = eval_g(z);
      for (int i = 0; i < m; ++i) c(i) = std::max(0.0, mu(i) + rho * g(i));
    }
    return c;
  };

  auto al_grad = [&](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> out) {
    if (problem.lagrangian_gradient) {
      problem.lagrangian_gradient(z, al_weights(z), out);
      return;
    }
    // Central differences on the AL value, one-sided at the box edge so the
    // objective is never probed outside its domain.
    Eigen::VectorXd zp = z;
    double f0 = std::numeric_limits<double>::quiet_NaN();
    for (int j = 0; j < problem.dim; ++j) {
      const double h = problem.fd_step * (1.0 + std::abs(z(j)));
      const bool up_ok = z(j) + h <= box.hi(j);
      const bool dn_ok = z(j) - h >= box.lo(j);
      if (up_ok && dn_ok) {
        zp(j) = z(j) + h;
        const double fp = al_value(zp);
        zp(j) = z(j) - h;
        out(j) = (fp - al_value(zp)) / (2.0 * h);
      } else {
        if (std::isnan(f0)) f0 = al_value(z);
        zp(j) = up_ok ? z(j) + h : z(j) - h;
        out(j) = (al_value(zp) - f0) / (zp(j) - z(j));
      }
      zp(j) = z(j);
    }
  };

  SolveReport report;
  Eigen::VectorXd z = box.project(z0);
  double viol_prev = kInf;
  bool inner_ok = false;
  bool blew_up = false;

  const int outers = (m == 0) ? 1 : tol.max_outer;
  for (int outer = 0; outer < outers; ++outer) {
    InnerResult inner = minimize_inner(al_value, al_grad, box, z, tol);
    z = inner.z;
    report.inner_iterations += inner.iterations;
    report.outer_iterations = outer + 1;
    report.projected_gradient_norm = inner.pg_norm;
    inner_ok = inner.converged;
    if (inner.blew_up) {
      blew_up = true;
      break;
    }

    double viol = 0.0;
    if (m > 0) {
      const Eigen::VectorXd& g = eval_g(z);
      viol = std::max(0.0, g.maxCoeff());
      report.outer_violation_history.push_back(viol);
      mu = (mu + rho * g).cwiseMax(0.0);
    }
    report.max_violation = viol;
    if (viol <= tol.eps_feas && inner_ok) break;
    if (m > 0 && outer + 1 < outers && viol > 0.25 * viol_prev)
      rho *= tol.rho_growth;
    viol_prev = viol;
  }

  report.z = z;
  report.objective = problem.objective(z);
  report.multipliers = mu;
  report.converged =
      !blew_up && inner_ok && report.max_violation <= tol.eps_feas;
  if (blew_up)
    report.reason = "objective blow-up";
  else if (report.converged)
    report.reason = "converged";
  else if (report.max_violation > tol.eps_feas)
    report.reason = "infeasible-or-slow";
  else
    report.reason = "iteration cap";
  return report;
}

} // namespace lfm
