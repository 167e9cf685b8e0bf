#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "lfm/baseline_kfrts.hpp"
#include "lfm/scenarios.hpp"

using namespace lfm;

namespace {

Eigen::MatrixXd random_stable(int n, std::mt19937_64& eng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = dist(eng);
  const double shift = A.eigenvalues().real().maxCoeff();
  A -= (shift + 0.5) * Eigen::MatrixXd::Identity(n, n);
  return A;
}

// Batch MAP estimate of the whole state sequence: the quadratic program's
// normal equations, solved densely. Independent oracle for the smoother.
std::vector<Eigen::VectorXd> batch_map(const DiscreteLinearModel& m,
                                       const std::vector<Eigen::VectorXd>& ys) {
  const int n = m.dim();
  const int N = static_cast<int>(ys.size());
  const int dim = n * N;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

  const Eigen::MatrixXd P0i = m.P0.inverse();
  const Eigen::MatrixXd Qi = m.Qd.inverse();
  const Eigen::MatrixXd Ri = m.Rv.inverse();

  H.topLeftCorner(n, n) += P0i;
  b.head(n) += P0i * m.m0;
  for (int k = 0; k < N; ++k) {
    H.block(k * n, k * n, n, n) += m.C.transpose() * Ri * m.C;
    b.segment(k * n, n) += m.C.transpose() * Ri * ys[k];
  }
  for (int k = 0; k + 1 < N; ++k) {
    H.block(k * n, k * n, n, n) += m.Ad.transpose() * Qi * m.Ad;
    H.block(k * n, (k + 1) * n, n, n) -= m.Ad.transpose() * Qi;
    H.block((k + 1) * n, k * n, n, n) -= Qi * m.Ad;
    H.block((k + 1) * n, (k + 1) * n, n, n) += Qi;
  }
  const Eigen::VectorXd x = H.ldlt().solve(b);
  std::vector<Eigen::VectorXd> out(N);
  for (int k = 0; k < N; ++k) out[k] = x.segment(k * n, n);
  return out;
}

} // namespace

TEST_CASE("discretize_lti basic identities") {
  SUBCASE("zero dynamics") {
    const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd Sw(2, 2);
    Sw << 2.0, 0.5, 0.5, 1.0;
    const auto [Ad, Qd] = discretize_lti(A, E, Sw, 0.3);
    CHECK(Ad.isIdentity(1e-14));
    CHECK((Qd - 0.3 * Sw).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("scalar closed form") {
    const Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(1, 1);
    const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(1, 1);
    const Eigen::MatrixXd q = 2.0 * Eigen::MatrixXd::Identity(1, 1);
    const auto [Ad, Qd] = discretize_lti(a, e, q, 0.1);
    CHECK(Ad(0, 0) == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));
    CHECK(Qd(0, 0) == doctest::Approx(1.0 - std::exp(-0.2)).epsilon(1e-12));
  }

  SUBCASE("Qd symmetric positive semidefinite for random stable systems") {
    std::mt19937_64 eng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd A = random_stable(3, eng);
      const auto [Ad, Qd] = discretize_lti(
          A, Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3),
          0.2);
      CHECK((Qd - Qd.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Qd);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
  }

  SUBCASE("semigroup property") {
    std::mt19937_64 eng(4);
    const Eigen::MatrixXd A = random_stable(3, eng);
    const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(3, 3);
    const auto [A1, Q1] = discretize_lti(A, E, S, 0.13);
    const auto [A2, Q2] = discretize_lti(A, E, S, 0.27);
    const auto [A3, Q3] = discretize_lti(A, E, S, 0.40);
    CHECK((A1 * A2 - A3).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("kalman filter identities") {
  SUBCASE("flat prior random walk averages the measurements") {
    DiscreteLinearModel m;
    m.Ad = Eigen::MatrixXd::Identity(1, 1);
    m.Qd = Eigen::MatrixXd::Zero(1, 1);
    m.C = Eigen::MatrixXd::Identity(1, 1);
    m.Rv = 0.04 * Eigen::MatrixXd::Identity(1, 1);
    m.m0 = Eigen::VectorXd::Zero(1);
    m.P0 = 1e12 * Eigen::MatrixXd::Identity(1, 1);
    std::vector<Eigen::VectorXd> ys;
    double sum = 0.0;
    for (double v : {0.9, 1.1, 1.3, 0.8, 1.05}) {
      ys.push_back(Eigen::VectorXd::Constant(1, v));
      sum += v;
    }
    const SmoothingResult r = kalman_filter(m, ys);
    CHECK(r.filtered_mean.back()(0) ==
          doctest::Approx(sum / ys.size()).epsilon(1e-6));
  }

  SUBCASE("near-perfect measurement pins the state") {
    DiscreteLinearModel m;
    m.Ad = Eigen::MatrixXd::Identity(1, 1);
    m.Qd = Eigen::MatrixXd::Zero(1, 1);
    m.C = Eigen::MatrixXd::Identity(1, 1);
    m.Rv = 1e-12 * Eigen::MatrixXd::Identity(1, 1);
    m.m0 = Eigen::VectorXd::Zero(1);
    m.P0 = Eigen::MatrixXd::Identity(1, 1);
    const SmoothingResult r =
        kalman_filter(m, {Eigen::VectorXd::Constant(1, 0.7)});
    CHECK(std::abs(r.filtered_mean[0](0) - 0.7) < 1e-6);
  }

  SUBCASE("single-measurement log likelihood") {
    DiscreteLinearModel m;
    m.Ad = Eigen::MatrixXd::Identity(1, 1);
    m.Qd = Eigen::MatrixXd::Zero(1, 1);
    m.C = Eigen::MatrixXd::Identity(1, 1);
    m.Rv = 0.3 * Eigen::MatrixXd::Identity(1, 1);
    m.m0 = Eigen::VectorXd::Zero(1);
    m.P0 = 0.7 * Eigen::MatrixXd::Identity(1, 1);
    const double y = 0.43;
    const double S = 1.0;
    const SmoothingResult r = kalman_filter(m, {Eigen::VectorXd::Constant(1, y)});
    const double expect = -0.5 * (std::log(2.0 * M_PI * S) + y * y / S);
    CHECK(r.log_likelihood == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("degenerate innovation is reported") {
    DiscreteLinearModel m;
    m.Ad = Eigen::MatrixXd::Identity(1, 1);
    m.Qd = Eigen::MatrixXd::Zero(1, 1);
    m.C = Eigen::MatrixXd::Identity(1, 1);
    m.Rv = Eigen::MatrixXd::Zero(1, 1);
    m.m0 = Eigen::VectorXd::Zero(1);
    m.P0 = Eigen::MatrixXd::Zero(1, 1);
    CHECK_THROWS_WITH_AS(kalman_filter(m, {Eigen::VectorXd::Zero(1)}),
                         "degenerate innovation", std::runtime_error);
  }
}

TEST_CASE("rts smoother") {
  std::mt19937_64 eng(5);
  std::normal_distribution<double> noise(0.0, 1.0);

  DiscreteLinearModel m;
  const auto [Ad, Qd] = discretize_lti(random_stable(2, eng),
                                       Eigen::MatrixXd::Identity(2, 2),
                                       Eigen::MatrixXd::Identity(2, 2), 0.2);
  m.Ad = Ad;
  m.Qd = Qd;
  m.C = Eigen::MatrixXd::Identity(1, 2);
  m.Rv = 0.25 * Eigen::MatrixXd::Identity(1, 1);
  m.m0 = Eigen::VectorXd::Zero(2);
  m.P0 = Eigen::MatrixXd::Identity(2, 2);

  std::vector<Eigen::VectorXd> ys;
  for (int k = 0; k < 5; ++k)
    ys.push_back(Eigen::VectorXd::Constant(1, noise(eng)));

  const SmoothingResult r = rts_smoother(m, kalman_filter(m, ys));

  SUBCASE("terminal state matches the filter") {
    CHECK((r.smoothed_mean.back() - r.filtered_mean.back()).norm() == 0.0);
  }

  SUBCASE("smoothed means equal the batch MAP solution") {
    const auto map = batch_map(m, ys);
    for (size_t k = 0; k < map.size(); ++k)
      CHECK((r.smoothed_mean[k] - map[k]).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("covariances stay symmetric positive semidefinite") {
    for (const auto& P : r.smoothed_cov) {
      CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-10);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }

  SUBCASE("deterministic chain under zero process noise") {
    DiscreteLinearModel d = m;
    d.Qd = Eigen::MatrixXd::Zero(2, 2);
    const SmoothingResult rd = rts_smoother(d, kalman_filter(d, ys));
    for (size_t k = 0; k + 1 < rd.smoothed_mean.size(); ++k)
      CHECK((rd.smoothed_mean[k + 1] - d.Ad * rd.smoothed_mean[k])
                .cwiseAbs()
                .maxCoeff() < 1e-9);
  }
}

TEST_CASE("length-scale search by marginal likelihood") {
  const TranscriptionParams params;
  const ContinuousModel base = transcription_model(params);
  const Eigen::VectorXd sw =
      Eigen::VectorXd::Constant(1, params.sigma_w * params.sigma_w);
  const double sv = params.sigma_v * params.sigma_v;

  const auto model_for = [&](double ell) {
    GpPrior prior{1, ell, 1.0};
    return lfm_discrete_model(base, prior, sw, sv, 0.01, 10.0,
                              Eigen::VectorXd());
  };

  SUBCASE("recovers the generating length scale within a factor of two") {
    const double ell_true = 1.0;
    const DiscreteLinearModel m = model_for(ell_true);
    GaussianRng rng(99);
    const Eigen::MatrixXd cholQ =
        Eigen::LLT<Eigen::MatrixXd>(
            m.Qd + 1e-15 * Eigen::MatrixXd::Identity(3, 3))
            .matrixL();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x(1) = 1.0;
    std::vector<Eigen::VectorXd> ys;
    for (int k = 0; k < 500; ++k) {
      Eigen::Vector3d z(rng(), rng(), rng());
      x = m.Ad * x + cholQ * z;
      ys.push_back(m.C * x +
                   Eigen::VectorXd::Constant(1, params.sigma_v * rng()));
    }
    LengthscaleSearch search;
    const double ell = optimize_lengthscale_ml(model_for, ys, search);
    CHECK(ell >= 0.5);
    CHECK(ell <= 2.0);

    SUBCASE("returned point is a local maximum") {
      const auto loglik = [&](double l) {
        return kalman_filter(model_for(l), ys).log_likelihood;
      };
      CHECK(loglik(ell) >= loglik(ell * 0.8) - 1e-9);
      CHECK(loglik(ell) >= loglik(ell * 1.25) - 1e-9);
    }
  }

  SUBCASE("degenerate data returns a value inside the bounds") {
    std::vector<Eigen::VectorXd> ys(60, Eigen::VectorXd::Zero(1));
    LengthscaleSearch search;
    const double ell = optimize_lengthscale_ml(model_for, ys, search);
    CHECK(ell >= search.lo);
    CHECK(ell <= search.hi);
  }

  SUBCASE("window too short") {
    LengthscaleSearch search;
    CHECK_THROWS_WITH_AS(
        optimize_lengthscale_ml(model_for, {Eigen::VectorXd::Zero(1)}, search),
        "window too short", std::invalid_argument);
  }
}
