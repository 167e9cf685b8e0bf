#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "lfm/nlp_solver.hpp"

using namespace lfm;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("unconstrained quadratic bowl") {
  NlpProblem p;
  p.dim = 4;
  Eigen::VectorXd c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  p.objective = [c](const Eigen::VectorXd& z) { return (z - c).squaredNorm(); };
  const SolveReport r = solve(p, Eigen::VectorXd::Zero(4));
  CHECK(r.converged);
  CHECK((r.z - c).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.projected_gradient_norm <= 1e-6);
}

TEST_CASE("active box bound") {
  NlpProblem p;
  p.dim = 1;
  p.lo = Eigen::VectorXd::Constant(1, -kInf);
  p.hi = Eigen::VectorXd::Constant(1, 1.0);
  p.objective = [](const Eigen::VectorXd& z) {
    return (z(0) - 2.0) * (z(0) - 2.0);
  };
  const SolveReport r = solve(p, Eigen::VectorXd::Zero(1));
  CHECK(r.converged);
  CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rosenbrock from the classic start") {
  NlpProblem p;
  p.dim = 2;
  p.objective = [](const Eigen::VectorXd& z) {
    const double a = 1.0 - z(0);
    const double b = z(1) - z(0) * z(0);
    return a * a + 100.0 * b * b;
  };
  Eigen::VectorXd z0(2);
  z0 << -1.2, 1.0;
  SolveTolerances tol;
  tol.eps_opt = 1e-8;
  tol.max_inner = 2000;
  const SolveReport r = solve(p, z0, tol);
  CHECK(r.converged);
  CHECK(std::abs(r.z(0) - 1.0) < 1e-4);
  CHECK(std::abs(r.z(1) - 1.0) < 1e-4);
}

TEST_CASE("inequality constraint with KKT multiplier") {
  // min z^2 s.t. z >= 1, written as g(z) = 1 - z <= 0; multiplier is 2.
  NlpProblem p;
  p.dim = 1;
  p.objective = [](const Eigen::VectorXd& z) { return z(0) * z(0); };
  p.num_constraints = 1;
  p.constraints = [](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> g) {
    g(0) = 1.0 - z(0);
  };
  const SolveReport r = solve(p, Eigen::VectorXd::Zero(1));
  CHECK(r.converged);
  CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.multipliers(0) == doctest::Approx(2.0).epsilon(1e-2));
  CHECK(r.max_violation <= 1e-6);

  SUBCASE("outer violations never increase") {
    for (size_t i = 1; i < r.outer_violation_history.size(); ++i)
      CHECK(r.outer_violation_history[i] <=
            r.outer_violation_history[i - 1] + 1e-12);
  }
}

TEST_CASE("iterates stay inside the box") {
  // The objective itself asserts feasibility of every evaluation point.
  NlpProblem p;
  p.dim = 3;
  p.lo = Eigen::VectorXd::Constant(3, -0.5);
  p.hi = Eigen::VectorXd::Constant(3, 2.0);
  bool violated = false;
  p.objective = [&violated, &p](const Eigen::VectorXd& z) {
    if ((z.array() < p.lo.array() - 1e-12).any() ||
        (z.array() > p.hi.array() + 1e-12).any())
      violated = true;
    return (z - Eigen::VectorXd::Constant(3, 5.0)).squaredNorm() +
           std::sin(z(0)) * 0.3;
  };
  const SolveReport r = solve(p, Eigen::VectorXd::Zero(3));
  CHECK(!violated);
  CHECK((r.z.array() <= p.hi.array() + 1e-12).all());
  CHECK((r.z.array() >= p.lo.array() - 1e-12).all());
}

TEST_CASE("supplied gradients agree with finite differences") {
  NlpProblem fd;
  fd.dim = 2;
  fd.objective = [](const Eigen::VectorXd& z) {
    return std::pow(z(0) - 0.3, 4) + (z(1) + 1.1) * (z(1) + 1.1) +
           0.2 * z(0) * z(1);
  };
  fd.num_constraints = 1;
  fd.constraints = [](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> g) {
    g(0) = -z(1) - 0.8; // z1 >= -0.8
  };

  NlpProblem an = fd;
  an.lagrangian_gradient = [&](const Eigen::VectorXd& z,
                               const Eigen::VectorXd& c,
                               Eigen::Ref<Eigen::VectorXd> out) {
    out(0) = 4.0 * std::pow(z(0) - 0.3, 3) + 0.2 * z(1);
    out(1) = 2.0 * (z(1) + 1.1) + 0.2 * z(0) - c(0);
  };

  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2);
  const SolveReport r1 = solve(fd, z0);
  const SolveReport r2 = solve(an, z0);
  CHECK(r1.converged);
  CHECK(r2.converged);
  CHECK((r1.z - r2.z).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(r2.z(1) == doctest::Approx(-0.8).epsilon(1e-5));
}

TEST_CASE("kkt residual at convergence") {
  NlpProblem p;
  p.dim = 2;
  p.objective = [](const Eigen::VectorXd& z) {
    return z.squaredNorm() + 0.5 * z(0) * z(1);
  };
  p.num_constraints = 1;
  p.constraints = [](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> g) {
    g(0) = 0.7 - z(0);
  };
  SolveTolerances tol;
  const SolveReport r = solve(p, Eigen::VectorXd::Zero(2), tol);
  CHECK(r.converged);
  CHECK(r.projected_gradient_norm <= 10.0 * tol.eps_opt);
}

TEST_CASE("failure modes") {
  SUBCASE("infeasible constraints") {
    NlpProblem p;
    p.dim = 1;
    p.objective = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };
    p.num_constraints = 1;
    p.constraints = [](const Eigen::VectorXd&, Eigen::Ref<Eigen::VectorXd> g) {
      g(0) = 1.0; // never satisfiable
    };
    SolveTolerances tol;
    tol.max_outer = 4;
    const SolveReport r = solve(p, Eigen::VectorXd::Zero(1), tol);
    CHECK(!r.converged);
    CHECK(r.reason == "infeasible-or-slow");
  }

  SUBCASE("non-finite objective") {
    NlpProblem p;
    p.dim = 1;
    p.objective = [](const Eigen::VectorXd&) {
      return std::numeric_limits<double>::infinity();
    };
    const SolveReport r = solve(p, Eigen::VectorXd::Zero(1));
    CHECK(!r.converged);
    CHECK(r.reason == "objective blow-up");
  }
}

TEST_CASE("multiplier warm starts do not change the answer") {
  NlpProblem p;
  p.dim = 1;
  p.objective = [](const Eigen::VectorXd& z) { return z(0) * z(0); };
  p.num_constraints = 1;
  p.constraints = [](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> g) {
    g(0) = 1.0 - z(0);
  };
  const SolveReport cold = solve(p, Eigen::VectorXd::Zero(1));
  Eigen::VectorXd mu0 = cold.multipliers;
  const SolveReport warm = solve(p, cold.z, {}, &mu0);
  CHECK(warm.converged);
  CHECK(std::abs(warm.z(0) - cold.z(0)) < 1e-6);
  CHECK(warm.inner_iterations <= cold.inner_iterations);
}
