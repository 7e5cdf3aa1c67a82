#include "sipmstat/prob_vec.hpp"

#include <algorithm>
#include <cmath>

namespace sipmstat {

double ProbVec::sum() const {
  double s = 0.0;
  for (double v : probs) s += v;
  return s;
}

bool ProbVec::is_normalized(double tol) const {
  for (double v : probs) {
    if (!(v >= 0.0 && v <= 1.0 + tol)) return false;
  }
  return std::abs(sum() - 1.0) <= tol;
}

Moments moments(const ProbVec& p) {
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    mean += static_cast<double>(n) * p[n];
    second += static_cast<double>(n) * static_cast<double>(n) * p[n];
  }
  return {mean, second - mean * mean};
}

double total_variation(const ProbVec& a, const ProbVec& b) {
  const std::size_t len = std::max(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double pa = n < a.size() ? a[n] : 0.0;
    const double pb = n < b.size() ? b[n] : 0.0;
    acc += std::abs(pa - pb);
  }
  return 0.5 * acc;
}

}  // namespace sipmstat
