#pragma once
// Raw event counts per detected photon number.

#include <cstdint>
#include <vector>

#include "sipmstat/prob_vec.hpp"
#include "sipmstat/rng.hpp"

namespace sipmstat {

struct CountHistogram {
  std::vector<std::int64_t> counts;

  CountHistogram() = default;
  explicit CountHistogram(std::vector<std::int64_t> c) : counts(std::move(c)) {}

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  void record(std::size_t n) {
    if (n >= counts.size()) counts.resize(n + 1, 0);
    ++counts[n];
  }

  void merge(const CountHistogram& other) {
    if (other.counts.size() > counts.size()) {
      counts.resize(other.counts.size(), 0);
    }
    for (std::size_t i = 0; i < other.counts.size(); ++i) {
      counts[i] += other.counts[i];
    }
  }

  /// Empirical probabilities.
  ProbVec normalized() const;

  /// Drops trailing zero bins.
  void shrink();
};

/// trials independent draws from p, binned. Deterministic in seed.
CountHistogram sample_counts(const ProbVec& p, std::int64_t trials,
                             std::uint64_t seed);

}  // namespace sipmstat
