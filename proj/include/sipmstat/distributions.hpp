#pragma once
// Source photon-number distributions: single-mode thermal, the multimode
// negative binomial family, and the Poisson limit.

#include "sipmstat/prob_vec.hpp"

namespace sipmstat {

/// Mean total photon number spread evenly over s thermal modes. Non-integer
/// s is allowed and is read as a weighted number of occupied modes.
struct ModeModel {
  double n_bar = 0.0;
  double s = 1.0;

  /// Per-mode mean.
  double mode_mean() const { return n_bar / s; }
};

/// p(n) = n_bar^n / (1 + n_bar)^(n+1). n_bar = 0 gives the vacuum.
ProbVec thermal_pmf(double n_bar, int n_max);

/// p(n) = C(s+n-1, s-1) / [(1 + n_bar/s)^s (1 + s/n_bar)^n], the photon
/// count of n_bar photons distributed over s equal thermal modes. The
/// binomial coefficient uses the gamma generalization, so fractional s is
/// supported. Reduces to thermal_pmf at s = 1 and to poisson_pmf as
/// s grows large.
ProbVec negative_binomial_pmf(const ModeModel& model, int n_max);

ProbVec poisson_pmf(double n_bar, int n_max);

/// Smallest n_max whose analytic tail mass is below tol.
int adaptive_n_max_thermal(double n_bar, double tol = kTruncTol);
int adaptive_n_max_poisson(double n_bar, double tol = kTruncTol);
int adaptive_n_max_negative_binomial(const ModeModel& model,
                                     double tol = kTruncTol);

}  // namespace sipmstat
