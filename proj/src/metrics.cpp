#include "lfm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace lfm {

double mse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("grid mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / a.size();
}

double mse_aligned(const std::vector<double>& t_a, const std::vector<double>& a,
                   const std::vector<double>& t_b,
                   const std::vector<double>& b) {
  if (t_a.size() != a.size() || t_b.size() != b.size() ||
      t_a.size() != t_b.size() || t_a.empty())
    throw std::invalid_argument("grid mismatch");
  for (size_t i = 0; i < t_a.size(); ++i)
    if (std::abs(t_a[i] - t_b[i]) > 1e-9 * std::max(1.0, std::abs(t_a[i])))
      throw std::invalid_argument("grid mismatch");
  return mse(a, b);
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  return std::sqrt(mse(a, b));
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("grid mismatch");
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

} // namespace lfm
