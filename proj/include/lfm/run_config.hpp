#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfm/baseline_kfrts.hpp"
#include "lfm/csv.hpp"
#include "lfm/metrics.hpp"
#include "lfm/ose.hpp"
#include "lfm/scenarios.hpp"

namespace lfm {

/// Weight matrix given in a config as a scalar (s * I), a diagonal, or a
/// full matrix. Scalars and diagonals materialize once the model dimension
/// is known.
struct WeightSpec {
  enum Kind { kNone, kScalar, kDiag, kFull } kind = kNone;
  double scalar = 0.0;
  Eigen::VectorXd diag;
  Eigen::MatrixXd full;

  bool given() const { return kind != kNone; }
  Eigen::MatrixXd materialize(int dim) const;
};

/// Everything a single estimation run needs, assembled from a JSON config
/// file. Unknown keys are rejected so typos fail loudly.
struct RunConfig {
  std::string method = "fie"; // fie | dmhe | kfrts
  std::string scenario;       // transcription | ballistic | "" (external model)
  uint64_t seed = 42;

  /// Scenario defaults with scalar overrides already applied; Q/R/P are
  /// replaced by the specs below when those were given.
  EstimationConfig est;
  WeightSpec q_spec, r_spec, p_spec;

  // fixed: use the configured prior as-is.
  // learn_then_freeze: estimate theta on the learn window, then rerun fixed.
  // augmented: keep theta as a state for the whole horizon.
  std::string hyperparameter_mode;

  GpPrior prior{1, 1.0, 1.0};
  bool prior_given = false;
  Eigen::VectorXd prior_mean; // full augmented, physical-only, or empty

  // External linear model (keys A, B, G, E, C), used when scenario is empty.
  bool has_model = false;
  Eigen::MatrixXd A, B, G, E, C;

  // KF/RTSS settings.
  Eigen::VectorXd sigma_w_sq; // per physical disturbance channel
  double sigma_v_sq = 0.0;
  double kappa = 10.0;
  LengthscaleSearch search;

  // transcription only: recompute the GP-row weights of Q from the frozen
  // length scale ("auto") or keep them as configured ("fixed").
  std::string gp_weight_mode = "auto";

  std::string overrides_json; // raw scenario overrides, applied at simulate
  std::string canonical;      // canonicalized config text for hashing
};

RunConfig parse_run_config_file(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

uint64_t fnv1a_hash(const std::string& s);
std::string config_hash_hex(const RunConfig& cfg);

/// Scenario dataset with overrides applied.
Dataset make_dataset(const RunConfig& cfg);

/// CSV images of a dataset (measurements.csv / truth.csv layouts).
CsvTable measurements_table(const Dataset& data, const std::string& config_hash);
CsvTable truth_table(const Dataset& data, const std::string& config_hash);

struct MeasurementSeries {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> y;
  double delta = 0.0;
};
MeasurementSeries measurements_from_table(const CsvTable& table);

CsvTable estimates_table(const EstimateResult& result,
                         const std::vector<double>& t,
                         const std::vector<std::string>& header_comments);

struct PipelineResult {
  EstimateResult estimate;
  MetricsReport metrics;
  int n_physical = 0;
  double frozen_length_scale = 0.0; // learn_then_freeze / kfrts runs
  bool low_confidence = false;
};

/// Run the configured method over a measurement series. The series must be
/// equidistant; its spacing must match the configured sampling time when
/// one was set.
PipelineResult run_estimation(const RunConfig& cfg,
                              const MeasurementSeries& series);

} // namespace lfm
