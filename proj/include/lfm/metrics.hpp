#pragma once

#include <map>
#include <string>
#include <vector>

namespace lfm {

/// Mean squared error between two node-aligned signals.
double mse(const std::vector<double>& a, const std::vector<double>& b);

/// Grid-checked variant: time stamps must agree within 1e-9 per node.
double mse_aligned(const std::vector<double>& t_a, const std::vector<double>& a,
                   const std::vector<double>& t_b, const std::vector<double>& b);

double rmse(const std::vector<double>& a, const std::vector<double>& b);

/// Pearson correlation coefficient.
double correlation(const std::vector<double>& a, const std::vector<double>& b);

struct MetricsReport {
  std::map<std::string, double> mse;
  std::map<std::string, double> rmse;
  double max_constraint_violation = 0.0;
  double wall_seconds = 0.0;
  long solver_iterations = 0;
};

} // namespace lfm
