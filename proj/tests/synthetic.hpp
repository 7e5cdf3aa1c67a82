#pragma once
// Synthetic measured-space datasets shared by the estimation tests and the
// acceptance suite.

#include "sipmstat/estimation.hpp"

namespace sipmstat::testing {

inline ProbVec measured_pmf(const DetectorParams& params, SourceFamily family,
                            double n_bar, double s, int k_max) {
  ProbVec out = measured_distribution(params, family, {n_bar, s}, k_max);
  if (out.sum() < 1.0 - 1e-9) {
    throw std::logic_error("measured_pmf: k_max too small for this source");
  }
  return out;
}

/// Multinomial sample of the full detection chain.
inline CountHistogram synthetic_counts(const DetectorParams& params,
                                       SourceFamily family, double n_bar,
                                       double s, std::int64_t trials,
                                       std::uint64_t seed, int k_max = 60) {
  CountHistogram h = sample_counts(measured_pmf(params, family, n_bar, s, k_max),
                                   trials, seed);
  h.shrink();
  return h;
}

}  // namespace sipmstat::testing
