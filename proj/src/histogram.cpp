#include "sipmstat/histogram.hpp"

#include <algorithm>
#include <stdexcept>

namespace sipmstat {

ProbVec CountHistogram::normalized() const {
  const std::int64_t t = total();
  if (t <= 0) throw std::invalid_argument("histogram has no events");
  ProbVec p(std::vector<double>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p[i] = static_cast<double>(counts[i]) / static_cast<double>(t);
  }
  return p;
}

void CountHistogram::shrink() {
  while (counts.size() > 1 && counts.back() == 0) counts.pop_back();
}

CountHistogram sample_counts(const ProbVec& p, std::int64_t trials,
                             std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("pmf sums to zero");

  CountHistogram h(std::vector<std::int64_t>(p.size(), 0));
  Rng rng(seed, 0x73616d706c65ull);
  for (std::int64_t t = 0; t < trials; ++t) {
    const double u = rng.next_double() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t n =
        it == cdf.end() ? p.size() - 1
                        : static_cast<std::size_t>(it - cdf.begin());
    ++h.counts[n];
  }
  return h;
}

}  // namespace sipmstat
