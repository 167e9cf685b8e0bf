#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lfm/dynamics.hpp"
#include "lfm/integrator.hpp"
#include "lfm/ose.hpp"

namespace lfm {

/// Sum of Gaussian pulses a_i exp(-(t - c_i)^2 / (2 s_i^2)).
struct LatentProfile {
  std::vector<double> amplitude, center, width;

  double operator()(double t) const;
  std::string describe() const;
};

/// mRNA transcription model dx = S ell - D x + w with state measurements.
struct TranscriptionParams {
  double S = 0.25;
  double D = 0.6;
  double sigma_w = 1e-3;  // process noise standard deviation
  double sigma_v = 0.025; // measurement noise standard deviation
  double delta = 0.01;
  int n_samples = 1500; // intervals; nodes = n_samples + 1
  double x0 = 0.0;
  LatentProfile ell{{1.0, 0.6}, {4.0, 10.0}, {1.0, 1.5}};
  GpPrior prior{1, 1.0, 1.0};
};

/// 1D ballistic reentry with range-only measurements. Process noise
/// variances per physical state; the latent force is an extra acceleration.
struct BallisticParams {
  double alpha = 4.49e-4;
  double gamma = 1.49e-4;
  double g = 9.81;
  double s_x = 30000.0;
  double s_y = 30.0;
  Eigen::Vector2d x0{65000.0, 3000.0};
  Eigen::Vector2d prior_mean{55000.0, 2000.0};
  double delta = 0.5;
  double T = 25.0;
  Eigen::Vector2d w_var{50.0, 10.0};
  double v_var = 900.0;
  LatentProfile ell{{15.0}, {12.0}, {2.0}};
  GpPrior prior{2, 1.0, 1.0};
};

struct Dataset {
  std::string scenario;
  uint64_t seed = 0;
  std::string rng_id;
  Grid grid;
  std::vector<Eigen::VectorXd> x_true; // nodes
  std::vector<double> ell_true;        // nodes
  std::vector<Eigen::VectorXd> u;      // per interval; empty for both scenarios
  std::vector<Eigen::VectorXd> y;      // nodes
  std::string profile;
};

Dataset transcription_scenario(uint64_t seed,
                               const TranscriptionParams& params = {});
Dataset ballistic_scenario(uint64_t seed, const BallisticParams& params = {});

ContinuousModel transcription_model(const TranscriptionParams& params = {});
ContinuousModel ballistic_model(const BallisticParams& params = {});

/// Estimation weights and options the scenarios were tuned with.
/// Throws on an unknown scenario name.
EstimationConfig default_weights(const std::string& scenario);

/// Seeded standard-normal generator: mt19937_64 bits mapped to doubles and
/// paired through the Box-Muller transform. Fully portable, so golden files
/// regenerate bit-identically everywhere.
class GaussianRng {
 public:
  explicit GaussianRng(uint64_t seed) : state_(seed) {}
  double operator()();
  static const char* id() { return "mt19937_64/box-muller/v1"; }

 private:
  double uniform();
  std::mt19937_64 state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace lfm
