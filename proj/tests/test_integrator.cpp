#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "lfm/baseline_kfrts.hpp"
#include "lfm/dynamics.hpp"
#include "lfm/integrator.hpp"
#include "lfm/scenarios.hpp"

using namespace lfm;

namespace {

// Scalar decay dx = -x with a decoupled GP block (G = 0).
AugmentedModel decay_model() {
  return augment(linear_model(-Eigen::MatrixXd::Identity(1, 1),
                              Eigen::MatrixXd(1, 0),
                              Eigen::MatrixXd::Zero(1, 1),
                              Eigen::MatrixXd::Identity(1, 1),
                              Eigen::MatrixXd::Identity(1, 1)),
                 GpPrior{1, 1.0, 1.0});
}

} // namespace

TEST_CASE("rk4_step is exact on a constant state") {
  const AugmentedModel m = decay_model();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3); // origin is an equilibrium
  const Eigen::VectorXd next =
      rk4_step(m, x, Eigen::VectorXd(), Eigen::VectorXd::Zero(3), 0.1);
  CHECK(next.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rk4_step matches the exponential on scalar decay") {
  const AugmentedModel m = decay_model();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  x(0) = 1.0;
  const Eigen::VectorXd next =
      rk4_step(m, x, Eigen::VectorXd(), Eigen::VectorXd::Zero(3), 0.1);
  CHECK(std::abs(next(0) - std::exp(-0.1)) < 1e-7);
  CHECK(next(0) == doctest::Approx(0.90483742).epsilon(1e-7));
}

TEST_CASE("rk4_step converges at fifth order locally") {
  // One step against the matrix exponential; halving h divides the error
  // by about 32.
  Eigen::MatrixXd A(2, 2);
  A << -0.3, 1.1, -1.0, -0.7;
  const AugmentedModel m =
      augment(linear_model(A, Eigen::MatrixXd(2, 0), Eigen::MatrixXd::Zero(2, 1),
                           Eigen::MatrixXd::Identity(2, 2),
                           Eigen::MatrixXd::Identity(1, 2)),
              GpPrior{1, 1.0, 1.0});
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  x(0) = 1.0;
  x(1) = -0.5;

  auto step_error = [&](double h) {
    const Eigen::VectorXd got =
        rk4_step(m, x, Eigen::VectorXd(), Eigen::VectorXd::Zero(4), h);
    const Eigen::Vector2d exact =
        ((A * h).exp() * x.head(2).eval()).eval();
    return (got.head(2) - exact).norm();
  };
  const double e1 = step_error(0.2);
  const double e2 = step_error(0.1);
  CHECK(e1 / e2 > 20.0);
  CHECK(e1 / e2 < 45.0);
}

TEST_CASE("simulate decays monotonically for a stable normal system") {
  const AugmentedModel m = decay_model();
  Eigen::VectorXd chi(3);
  chi << 1.0, 0.5, -0.2;
  const Grid grid{0.0, 0.1, 50, 1};
  const auto xs = simulate(m, chi, PiecewiseSignal{}, PiecewiseSignal{}, grid);
  REQUIRE(static_cast<int>(xs.size()) == 51);
  for (size_t k = 1; k < xs.size(); ++k)
    CHECK(xs[k].norm() <= xs[k - 1].norm() + 1e-12);
}

TEST_CASE("substep refinement hardly changes a smooth trajectory") {
  const TranscriptionParams params;
  const AugmentedModel m = augment(transcription_model(params), params.prior);
  Grid coarse{0.0, 0.01, 200, 1};
  Grid fine = coarse;
  fine.substeps = 8;

  PiecewiseSignal w = PiecewiseSignal::zero(coarse, 3);
  for (int k = 0; k < coarse.n_intervals; ++k)
    w.values[k](2) = std::sin(0.05 * k);
  Eigen::VectorXd chi(3);
  chi << 0.0, 0.3, 0.0;

  const auto a = simulate(m, chi, PiecewiseSignal{}, w, coarse);
  const auto b = simulate(m, chi, PiecewiseSignal{}, w, fine);
  double worst = 0.0;
  for (size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, (a[k] - b[k]).cwiseAbs().maxCoeff());
  CHECK(worst < 1e-6);
}

TEST_CASE("integration blow-up is reported") {
  ContinuousModel cubic;
  cubic.n = 1;
  cubic.m_u = 0;
  cubic.p = 1;
  cubic.q = 1;
  cubic.E = Eigen::MatrixXd::Identity(1, 1);
  cubic.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double,
               Eigen::Ref<Eigen::VectorXd> dx) { dx(0) = x(0) * x(0) * x(0); };
  cubic.h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
               Eigen::Ref<Eigen::VectorXd> y) { y = x; };
  const AugmentedModel m = augment(cubic, GpPrior{1, 1.0, 1.0});
  Eigen::VectorXd chi = Eigen::VectorXd::Zero(3);
  chi(0) = 10.0;
  const Grid grid{0.0, 1000.0, 5, 1};
  CHECK_THROWS_WITH_AS(
      simulate(m, chi, PiecewiseSignal{}, PiecewiseSignal{}, grid),
      "integration blow-up", std::runtime_error);
}

TEST_CASE("trajectory jacobians agree with discretized transition matrices") {
  const TranscriptionParams params;
  const AugmentedModel m = augment(transcription_model(params), params.prior);
  const Eigen::MatrixXd Aa = augmented_system_matrix(m);
  const Eigen::MatrixXd Ea = augmented_disturbance_map(m);

  const double delta = 0.05;
  const int N = 8;
  const Grid grid{0.0, delta, N, 4};
  Eigen::VectorXd chi(3);
  chi << 0.2, -0.1, 0.4;
  PiecewiseSignal w = PiecewiseSignal::zero(grid, 3);
  for (int k = 0; k < N; ++k) w.values[k].setConstant(0.1 * (k % 3));

  const TrajectoryJacobians J =
      trajectory_jacobians(m, chi, PiecewiseSignal{}, w, grid);

  const Eigen::MatrixXd Ad = (Aa * delta).exp();
  const Eigen::MatrixXd Gd = lti_input_map(Aa, delta) * Ea;
  std::vector<Eigen::MatrixXd> Adpow(N + 1,
                                     Eigen::MatrixXd::Identity(3, 3));
  for (int i = 1; i <= N; ++i) Adpow[i] = Ad * Adpow[i - 1];

  for (int i = 0; i <= N; ++i) {
    CHECK((J.jac[i].leftCols(3) - Adpow[i]).cwiseAbs().maxCoeff() < 1e-5);
    for (int j = 0; j < N; ++j) {
      const Eigen::MatrixXd block = J.jac[i].block(0, 3 + 3 * j, 3, 3);
      if (j < i)
        CHECK((block - Adpow[i - j - 1] * Gd).cwiseAbs().maxCoeff() < 1e-5);
      else
        CHECK(block.cwiseAbs().maxCoeff() == 0.0); // causality
    }
  }

  SUBCASE("central differences agree with forward differences") {
    const TrajectoryJacobians Jc =
        trajectory_jacobians(m, chi, PiecewiseSignal{}, w, grid, true);
    for (int i = 0; i <= N; ++i)
      CHECK((J.jac[i] - Jc.jac[i]).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("step_with_jacobians is exact for linear dynamics") {
  const TranscriptionParams params;
  const AugmentedModel m = augment(transcription_model(params), params.prior);
  const Eigen::MatrixXd Aa = augmented_system_matrix(m);
  const Eigen::MatrixXd Ea = augmented_disturbance_map(m);
  const double delta = 0.05;

  Eigen::VectorXd x(3), w(3);
  x << 0.4, 0.2, -0.3;
  w << 0.01, 0.0, 0.2;
  const StepLinearization lin =
      step_with_jacobians(m, x, Eigen::VectorXd(), w, delta, 4);

  // Close to the exact discretization, up to RK4 truncation.
  const Eigen::MatrixXd Ad = (Aa * delta).exp();
  const Eigen::MatrixXd Gd = lti_input_map(Aa, delta) * Ea;
  CHECK((lin.A - Ad).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((lin.B - Gd).cwiseAbs().maxCoeff() < 1e-8);

  // Finite differences of a linear map carry no truncation error, only
  // roundoff amplified by the difference quotient (~eps / step).
  CHECK((lin.A * x + lin.B * w - lin.x_next).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("default substep rule") {
  CHECK(default_substeps(0.01) == 1);
  CHECK(default_substeps(0.02) == 1);
  CHECK(default_substeps(0.5) == 4);
}
