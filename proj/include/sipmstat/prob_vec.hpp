#pragma once
// Truncated photon-number probability vectors and their basic statistics.

#include <cstddef>
#include <vector>

namespace sipmstat {

/// Default bound on the probability mass a truncation may discard.
inline constexpr double kTruncTol = 1e-9;

/// Probabilities indexed by photon number n = 0..n_max.
struct ProbVec {
  std::vector<double> probs;

  ProbVec() = default;
  explicit ProbVec(std::vector<double> p) : probs(std::move(p)) {}

  int n_max() const { return static_cast<int>(probs.size()) - 1; }
  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t n) const { return probs[n]; }
  double& operator[](std::size_t n) { return probs[n]; }

  double sum() const;
  /// True when all entries lie in [0,1] and the total is within tol of 1.
  bool is_normalized(double tol = kTruncTol) const;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance over the truncated support.
Moments moments(const ProbVec& p);

/// (1/2) sum |p - q|; shorter vector is zero-padded.
double total_variation(const ProbVec& a, const ProbVec& b);

}  // namespace sipmstat
