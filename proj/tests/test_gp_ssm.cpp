#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "lfm/gp_ssm.hpp"
#include "lfm/integrator.hpp"
#include "lfm/scenarios.hpp"

using namespace lfm;

TEST_CASE("matern_ssm companion rows") {
  GpPrior p1{1, 2.5, 1.0};
  const double lam1 = std::sqrt(3.0) / 2.5;
  CHECK(p1.lambda() == doctest::Approx(lam1).epsilon(1e-14));
  const SsmRealization ssm1 = matern_ssm(p1);
  REQUIRE(ssm1.dim() == 2);
  CHECK(ssm1.F(0, 0) == 0.0);
  CHECK(ssm1.F(0, 1) == 1.0);
  CHECK(ssm1.F(1, 0) == doctest::Approx(-lam1 * lam1).epsilon(1e-14));
  CHECK(ssm1.F(1, 1) == doctest::Approx(-2.0 * lam1).epsilon(1e-14));
  CHECK(ssm1.L(0) == 0.0);
  CHECK(ssm1.L(1) == 1.0);
  CHECK(ssm1.C(0) == 1.0);
  CHECK(ssm1.C(1) == 0.0);

  GpPrior p2{2, 1.7, 0.8};
  const double lam2 = std::sqrt(5.0) / 1.7;
  const SsmRealization ssm2 = matern_ssm(p2);
  REQUIRE(ssm2.dim() == 3);
  CHECK(ssm2.F(2, 0) == doctest::Approx(-std::pow(lam2, 3)).epsilon(1e-14));
  CHECK(ssm2.F(2, 1) == doctest::Approx(-3.0 * lam2 * lam2).epsilon(1e-14));
  CHECK(ssm2.F(2, 2) == doctest::Approx(-3.0 * lam2).epsilon(1e-14));
}

TEST_CASE("matern_ssm white-noise density from the variance condition") {
  // lambda = 1 at ell = sqrt(3); the Lyapunov solution forces q = 4.
  const SsmRealization ssm = matern_ssm({1, std::sqrt(3.0), 1.0});
  CHECK(ssm.q == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("matern_ssm rejects unsupported orders") {
  CHECK_THROWS_WITH_AS(matern_ssm({0, 1.0, 1.0}), "unsupported Matérn order",
                       std::invalid_argument);
  CHECK_THROWS_AS(matern_ssm({3, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(matern_ssm({1, -1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(matern_ssm({1, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("stationary covariance solves the Lyapunov equation") {
  const SsmRealization ssm = matern_ssm({1, std::sqrt(3.0), 1.0});
  const Eigen::MatrixXd S = stationary_covariance(ssm);
  CHECK(S(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(S(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(S(0, 1)) < 1e-12);

  SUBCASE("defining residual") {
    for (int order : {1, 2}) {
      const SsmRealization s = matern_ssm({order, 0.7, 2.3});
      const Eigen::MatrixXd Sigma = stationary_covariance(s);
      const Eigen::MatrixXd resid = s.F * Sigma + Sigma * s.F.transpose() +
                                    s.L * s.q * s.L.transpose();
      CHECK(resid.cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  SUBCASE("zero forcing gives zero covariance") {
    SsmRealization z = ssm;
    z.q = 0.0;
    CHECK(stationary_covariance(z).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("non-Hurwitz realization is rejected") {
    SsmRealization bad = ssm;
    bad.F(1, 1) = 2.0; // positive trace, unstable
    bad.F(1, 0) = 1.0;
    CHECK_THROWS_WITH_AS(stationary_covariance(bad), "unstable realization",
                         std::runtime_error);
  }
}

TEST_CASE("spectral density") {
  const SsmRealization ssm = matern_ssm({1, std::sqrt(3.0), 1.0});
  CHECK(spectral_density(ssm, 0.0) == doctest::Approx(4.0).epsilon(1e-12));
  for (double w : {0.3, 1.0, 2.7, 9.0})
    CHECK(spectral_density(ssm, w) ==
          doctest::Approx(spectral_density(ssm, -w)).epsilon(1e-13));
}

TEST_CASE("realized and analytic spectral densities match on [0, 10 lambda]") {
  for (int order : {1, 2}) {
    const GpPrior prior{order, 1.3, 0.6};
    const SsmRealization ssm = matern_ssm(prior);
    const double lam = prior.lambda();
    for (int i = 0; i <= 200; ++i) {
      const double w = 10.0 * lam * i / 200.0;
      CHECK(std::abs(spectral_density(ssm, w) -
                     matern_spectral_density(prior, w)) < 1e-10);
    }
  }
}

TEST_CASE("stationary variance equals the signal variance") {
  for (int order : {1, 2})
    for (double var : {0.3, 1.0, 4.2}) {
      const GpPrior prior{order, 0.9, var};
      const Eigen::MatrixXd S = stationary_covariance(matern_ssm(prior));
      CHECK(std::abs(S(0, 0) - var) < 1e-10);
    }
}

TEST_CASE("F is Hurwitz") {
  for (int order : {1, 2}) {
    const SsmRealization ssm = matern_ssm({order, 2.0, 1.0});
    CHECK(ssm.F.eigenvalues().real().maxCoeff() < 0.0);
  }
}

TEST_CASE("matern covariance closed forms") {
  GpPrior p{1, std::sqrt(3.0), 1.0}; // lambda = 1
  CHECK(matern_covariance(p, 0.0) == doctest::Approx(1.0));
  CHECK(matern_covariance(p, 1.0) ==
        doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  for (double tau : {0.2, 1.5, 4.0})
    CHECK(matern_covariance(p, tau) ==
          doctest::Approx(matern_covariance(p, -tau)).epsilon(1e-14));

  GpPrior p2{2, 1.0, 3.0};
  CHECK(matern_covariance(p2, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("spectral density and covariance are a Fourier pair") {
  // k(tau) = (1/pi) int_0^inf S(w) cos(w tau) dw, via Simpson quadrature.
  for (int order : {1, 2}) {
    const GpPrior prior{order, std::sqrt(2.0 * (order + 0.5)), 1.0}; // lambda=1
    const SsmRealization ssm = matern_ssm(prior);
    const double wmax = 400.0;
    const int n = 40000; // even
    const double dw = wmax / n;
    for (double tau : {0.0, 0.5, 1.0, 2.5, 5.0}) {
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double w = i * dw;
        const double f = spectral_density(ssm, w) * std::cos(w * tau);
        const double c = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += c * f;
      }
      const double k = acc * dw / 3.0 / M_PI;
      CHECK(std::abs(k - matern_covariance(prior, tau)) < 1e-4);
    }
  }
}

TEST_CASE("sample paths reproduce the covariance" * doctest::timeout(300)) {
  // Simulate the realization driven by interval-constant noise of matching
  // density and compare the empirical autocovariance at a few lags.
  const GpPrior prior{1, std::sqrt(3.0), 1.0}; // lambda = 1
  const SsmRealization ssm = matern_ssm(prior);

  ContinuousModel base = linear_model(
      Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd(1, 0),
      Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Identity(1, 1),
      Eigen::MatrixXd::Identity(1, 1));
  const AugmentedModel model = augment(base, prior);

  const double delta = 0.02;
  const int steps = 800; // 16 time units per path
  const int paths = 300;
  const Grid grid{0.0, delta, steps, 1};
  const double w_std = std::sqrt(ssm.q / delta);
  const Eigen::MatrixXd chol =
      Eigen::LLT<Eigen::MatrixXd>(stationary_covariance(ssm)).matrixL();

  GaussianRng rng(1234);
  const std::vector<double> lags = {0.0, 0.5, 1.0, 2.0};
  std::vector<std::vector<double>> per_path(lags.size());

  for (int r = 0; r < paths; ++r) {
    Eigen::VectorXd chi = Eigen::VectorXd::Zero(3);
    chi.tail(2) = chol * Eigen::Vector2d(rng(), rng());
    PiecewiseSignal w = PiecewiseSignal::zero(grid, model.n_w());
    for (int k = 0; k < steps; ++k) w.values[k](2) = w_std * rng();
    const auto xs = simulate(model, chi, PiecewiseSignal{}, w, grid);

    for (size_t li = 0; li < lags.size(); ++li) {
      const int m = static_cast<int>(std::lround(lags[li] / delta));
      double acc = 0.0;
      for (int k = 0; k + m <= steps; ++k) acc += xs[k](1) * xs[k + m](1);
      per_path[li].push_back(acc / (steps - m + 1));
    }
  }

  for (size_t li = 0; li < lags.size(); ++li) {
    double mean = 0.0;
    for (double v : per_path[li]) mean += v;
    mean /= paths;
    double var = 0.0;
    for (double v : per_path[li]) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (paths - 1) / paths);
    const double expected = matern_covariance(prior, lags[li]);
    INFO("lag ", lags[li], " mean ", mean, " expected ", expected, " se ", se);
    CHECK(std::abs(mean - expected) < 3.0 * se);
  }
}
