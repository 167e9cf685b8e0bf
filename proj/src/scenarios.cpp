#include "lfm/scenarios.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lfm {

double LatentProfile::operator()(double t) const {
  double v = 0.0;
  for (size_t i = 0; i < amplitude.size(); ++i) {
    const double d = (t - center[i]) / width[i];
    v += amplitude[i] * std::exp(-0.5 * d * d);
  }
  return v;
}

std::string LatentProfile::describe() const {
  std::ostringstream os;
  for (size_t i = 0; i < amplitude.size(); ++i) {
    if (i) os << "+";
    os << "gauss(a=" << amplitude[i] << ",c=" << center[i]
       << ",s=" << width[i] << ")";
  }
  return os.str();
}

double GaussianRng::uniform() {
  // 53-bit mantissa in [2^-53, 1]; never exactly zero so log() is safe.
  return (static_cast<double>(state_() >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianRng::operator()() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

ContinuousModel transcription_model(const TranscriptionParams& params) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(1, 1, -params.D);
  const Eigen::MatrixXd B(1, 0);
  const Eigen::MatrixXd G = Eigen::MatrixXd::Constant(1, 1, params.S);
  const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::MatrixXd C = Eigen::MatrixXd::Identity(1, 1);
  return linear_model(A, B, G, E, C);
}

ContinuousModel ballistic_model(const BallisticParams& params) {
  ContinuousModel model;
  model.n = 2;
  model.m_u = 0;
  model.p = 1;
  model.q = 2;
  model.E = Eigen::MatrixXd::Identity(2, 2);
  const double alpha = params.alpha, gamma = params.gamma, g = params.g;
  model.f = [alpha, gamma, g](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                              double ell, Eigen::Ref<Eigen::VectorXd> dx) {
    dx(0) = -x(1);
    dx(1) = -alpha * std::exp(-gamma * x(0)) * x(1) * x(1) + g + ell;
  };
  const double sx = params.s_x, sy = params.s_y;
  model.h = [sx, sy](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                     Eigen::Ref<Eigen::VectorXd> y) {
    y(0) = std::sqrt(sx * sx + (sy - x(0)) * (sy - x(0)));
  };
  return model;
}

namespace {

// Integrate the true system on the grid: continuous latent profile at the
// RK4 stage times, disturbance held constant per interval.
template <typename Rhs>
std::vector<Eigen::VectorXd> simulate_truth(const Rhs& rhs,
                                            const Eigen::VectorXd& x0,
                                            const Grid& grid,
                                            const std::vector<Eigen::VectorXd>& w) {
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(grid.nodes());
  xs.push_back(x0);
  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd x = x0, k1(n), k2(n), k3(n), k4(n);
  const double h = grid.delta / grid.substeps;
  for (int k = 0; k < grid.n_intervals; ++k) {
    double t = grid.node(k);
    for (int s = 0; s < grid.substeps; ++s) {
      rhs(t, x, w[k], k1);
      rhs(t + 0.5 * h, x + 0.5 * h * k1, w[k], k2);
      rhs(t + 0.5 * h, x + 0.5 * h * k2, w[k], k3);
      rhs(t + h, x + h * k3, w[k], k4);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    xs.push_back(x);
  }
  return xs;
}

} // namespace

Dataset transcription_scenario(uint64_t seed, const TranscriptionParams& p) {
  Dataset data;
  data.scenario = "transcription";
  data.seed = seed;
  data.rng_id = GaussianRng::id();
  data.profile = p.ell.describe();
  data.grid = Grid{0.0, p.delta, p.n_samples, default_substeps(p.delta)};

  GaussianRng rng(seed);
  std::vector<Eigen::VectorXd> w(p.n_samples);
  for (auto& wk : w) wk = Eigen::VectorXd::Constant(1, p.sigma_w * rng());

  const auto rhs = [&p](double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& wk,
                        Eigen::Ref<Eigen::VectorXd> dx) {
    dx(0) = p.S * p.ell(t) - p.D * x(0) + wk(0);
  };
  data.x_true = simulate_truth(rhs, Eigen::VectorXd::Constant(1, p.x0),
                               data.grid, w);

  data.ell_true.resize(data.grid.nodes());
  data.y.resize(data.grid.nodes());
  for (int k = 0; k < data.grid.nodes(); ++k) {
    data.ell_true[k] = p.ell(data.grid.node(k));
    data.y[k] = data.x_true[k] +
                Eigen::VectorXd::Constant(1, p.sigma_v * rng());
  }
  return data;
}

Dataset ballistic_scenario(uint64_t seed, const BallisticParams& p) {
  Dataset data;
  data.scenario = "ballistic";
  data.seed = seed;
  data.rng_id = GaussianRng::id();
  data.profile = p.ell.describe();
  const int n_intervals = static_cast<int>(std::llround(p.T / p.delta));
  data.grid = Grid{0.0, p.delta, n_intervals, default_substeps(p.delta)};

  GaussianRng rng(seed);
  const Eigen::Vector2d w_std = p.w_var.cwiseSqrt();
  std::vector<Eigen::VectorXd> w(n_intervals);
  for (auto& wk : w) {
    wk.resize(2);
    wk(0) = w_std(0) * rng();
    wk(1) = w_std(1) * rng();
  }

  const auto rhs = [&p](double t, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& wk,
                        Eigen::Ref<Eigen::VectorXd> dx) {
    dx(0) = -x(1) + wk(0);
    dx(1) = -p.alpha * std::exp(-p.gamma * x(0)) * x(1) * x(1) + p.g +
            p.ell(t) + wk(1);
  };
  data.x_true = simulate_truth(rhs, p.x0, data.grid, w);

  const double v_std = std::sqrt(p.v_var);
  data.ell_true.resize(data.grid.nodes());
  data.y.resize(data.grid.nodes());
  for (int k = 0; k < data.grid.nodes(); ++k) {
    const auto& x = data.x_true[k];
    data.ell_true[k] = p.ell(data.grid.node(k));
    const double range =
        std::sqrt(p.s_x * p.s_x + (p.s_y - x(0)) * (p.s_y - x(0)));
    data.y[k] = Eigen::VectorXd::Constant(1, range + v_std * rng());
  }
  return data;
}

EstimationConfig default_weights(const std::string& scenario) {
  EstimationConfig cfg;
  if (scenario == "transcription") {
    const TranscriptionParams p;
    // Inverse variances of the interval-constant disturbances: sigma_w^2 on
    // the physical row, q_gp / delta on the GP rows (at the default length
    // scale). The interior GP row carries no noise in the prior model and
    // is pinned to zero through its bounds.
    const double q_gp = matern_ssm(p.prior).q;
    const double gp_weight = p.delta / q_gp;
    cfg.Q = Eigen::Vector3d(1.0 / (p.sigma_w * p.sigma_w), 1.0, gp_weight)
                .asDiagonal();
    cfg.R = Eigen::MatrixXd::Constant(1, 1, 1.0 / (p.sigma_v * p.sigma_v));
    cfg.P = 1e-2 * Eigen::MatrixXd::Identity(3, 3);
    cfg.delta = p.delta;
    cfg.horizon = 60 * p.delta;
    cfg.learn_samples = 60;
    cfg.constraints = ConstraintSet::unbounded(3, 3, 1);
    cfg.constraints.state_lo(1) = 0.0; // latent force is a concentration
    cfg.constraints.w_lo(1) = 0.0;
    cfg.constraints.w_hi(1) = 0.0;
    cfg.tol.eps_opt = 1e-6;
    cfg.tol.max_inner = 400;
  } else if (scenario == "ballistic") {
    Eigen::VectorXd qdiag(6);
    qdiag << 10, 10, 1, 1, 10, 1;
    cfg.Q = qdiag.asDiagonal();
    cfg.R = Eigen::MatrixXd::Identity(1, 1);
    cfg.P = 1e-11 * Eigen::MatrixXd::Identity(6, 6);
    cfg.delta = 0.5;
    cfg.central_differences = true;
    cfg.tol.eps_opt = 1e-2;
    cfg.tol.max_inner = 3000;
    cfg.theta_initial = 1.0;
  } else {
    throw std::invalid_argument("unknown scenario: " + scenario);
  }
  return cfg;
}

} // namespace lfm
