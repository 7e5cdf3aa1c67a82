#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sipmstat/distributions.hpp"

using namespace sipmstat;

namespace {

// Brute-force check of the multimode combinatorics: sum the joint thermal
// probability over every ordered way of splitting n photons across s modes.
// Each mode carries mean n_bar / s.
double partition_sum(double n_bar, int s, int n) {
  const double mode_mean = n_bar / s;
  auto thermal_at = [mode_mean](int k) {
    return std::pow(mode_mean / (1.0 + mode_mean), k) / (1.0 + mode_mean);
  };
  std::vector<int> split(s, 0);
  double acc = 0.0;
  // odometer over all tuples with entries in [0, n]
  while (true) {
    int total = 0;
    for (int v : split) total += v;
    if (total == n) {
      double prod = 1.0;
      for (int v : split) prod *= thermal_at(v);
      acc += prod;
    }
    int pos = 0;
    while (pos < s && ++split[pos] > n) {
      split[pos] = 0;
      ++pos;
    }
    if (pos == s) break;
  }
  return acc;
}

}  // namespace

TEST_CASE("thermal pmf matches the closed form") {
  const ProbVec p = thermal_pmf(1.0, 3);
  REQUIRE(p.size() == 4);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(p[3] == doctest::Approx(0.0625).epsilon(1e-14));
}

TEST_CASE("thermal vacuum limit") {
  const ProbVec p = thermal_pmf(0.0, 5);
  CHECK(p[0] == 1.0);
  for (int n = 1; n <= 5; ++n) CHECK(p[n] == 0.0);
}

TEST_CASE("thermal mean recovers n_bar at adaptive truncation") {
  const double n_bar = 8.9;
  const int n_max = adaptive_n_max_thermal(n_bar);
  const Moments m = moments(thermal_pmf(n_bar, n_max));
  CHECK(m.mean == doctest::Approx(n_bar).epsilon(1e-6));
}

TEST_CASE("thermal rejects negative mean") {
  CHECK_THROWS_AS(thermal_pmf(-0.1, 5), std::invalid_argument);
  CHECK_THROWS_AS(poisson_pmf(-1.0, 5), std::invalid_argument);
}

TEST_CASE("poisson pmf direct values") {
  const ProbVec p = poisson_pmf(1.0, 2);
  const double e1 = std::exp(-1.0);
  CHECK(p[0] == doctest::Approx(e1).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(e1).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(0.5 * e1).epsilon(1e-14));

  const ProbVec vac = poisson_pmf(0.0, 4);
  CHECK(vac[0] == 1.0);
  CHECK(vac.sum() == 1.0);
}

TEST_CASE("negative binomial hand evaluation at n_bar=2, s=2") {
  const ProbVec p = negative_binomial_pmf({2.0, 2.0}, 1);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
  // cross-check against the partition oracle
  CHECK(p[0] == doctest::Approx(partition_sum(2.0, 2, 0)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(partition_sum(2.0, 2, 1)).epsilon(1e-12));
}

TEST_CASE("negative binomial equals brute-force partition sums") {
  for (const int s : {1, 2, 3}) {
    for (const double n_bar : {0.4, 1.0, 2.5}) {
      const ProbVec p = negative_binomial_pmf({n_bar, double(s)}, 6);
      for (int n = 0; n <= 6; ++n) {
        CHECK(p[n] ==
              doctest::Approx(partition_sum(n_bar, s, n)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("negative binomial reduces to thermal at s=1") {
  const ProbVec nb = negative_binomial_pmf({1.7, 1.0}, 60);
  const ProbVec th = thermal_pmf(1.7, 60);
  for (int n = 0; n <= 60; ++n) {
    CHECK(std::abs(nb[n] - th[n]) <= 1e-12);
  }
}

TEST_CASE("negative binomial approaches poisson for many modes") {
  const ProbVec nb4 = negative_binomial_pmf({2.0, 1e4}, 20);
  const ProbVec pois20 = poisson_pmf(2.0, 20);
  CHECK(total_variation(nb4, pois20) < 1e-3);

  const ProbVec nb6 = negative_binomial_pmf({2.0, 1e6}, 30);
  const ProbVec pois30 = poisson_pmf(2.0, 30);
  CHECK(total_variation(nb6, pois30) < 1e-5);
}

TEST_CASE("negative binomial rejects bad mode counts") {
  CHECK_THROWS_AS(negative_binomial_pmf({1.0, 0.0}, 5), std::invalid_argument);
  CHECK_THROWS_AS(negative_binomial_pmf({1.0, -2.0}, 5), std::invalid_argument);
}

TEST_CASE("variance decreases monotonically in the mode count") {
  const double n_bar = 3.0;
  double previous = 1e300;
  for (const double s : {0.5, 1.0, 1.4, 2.0, 5.5, 10.0, 100.0, 1e4}) {
    const int n_max = adaptive_n_max_negative_binomial({n_bar, s}, 1e-12);
    const Moments m = moments(negative_binomial_pmf({n_bar, s}, n_max));
    // untruncated variance is n_bar + n_bar^2 / s
    CHECK(m.variance ==
          doctest::Approx(n_bar + n_bar * n_bar / s).epsilon(1e-5));
    CHECK(m.variance < previous);
    previous = m.variance;
  }
}

TEST_CASE("moments of reference distributions") {
  const Moments vac = moments(thermal_pmf(0.0, 5));
  CHECK(vac.mean == 0.0);
  CHECK(vac.variance == 0.0);

  const Moments th = moments(thermal_pmf(1.0, 60));
  CHECK(std::abs(th.mean - 1.0) < 1e-9);
  CHECK(std::abs(th.variance - 2.0) < 1e-6);

  const Moments po = moments(poisson_pmf(3.0, 60));
  CHECK(std::abs(po.variance - 3.0) < 1e-6);
}

TEST_CASE("adaptive truncation keeps the discarded tail below tolerance") {
  for (const double n_bar : {0.3, 1.0, 8.9, 25.0}) {
    const int n_max = adaptive_n_max_thermal(n_bar);
    const ProbVec p = thermal_pmf(n_bar, n_max);
    CHECK(std::abs(p.sum() - 1.0) <= kTruncTol);
    if (n_max > 0) {
      const ProbVec shorter = thermal_pmf(n_bar, n_max - 5 > 0 ? n_max - 5 : 0);
      CHECK(shorter.sum() < p.sum());
    }
  }
  for (const double n_bar : {0.5, 2.0, 9.0}) {
    const int n_max = adaptive_n_max_poisson(n_bar);
    CHECK(std::abs(poisson_pmf(n_bar, n_max).sum() - 1.0) <= kTruncTol);
    for (const double s : {0.7, 1.4, 5.5, 23.0}) {
      const int nb_max = adaptive_n_max_negative_binomial({n_bar, s});
      CHECK(std::abs(negative_binomial_pmf({n_bar, s}, nb_max).sum() - 1.0) <=
            kTruncTol);
    }
  }
}

TEST_CASE("pmf values stay finite at large counts") {
  // the log-space evaluation must not overflow where naive binomials would
  const ProbVec p = negative_binomial_pmf({30.0, 5.5}, 400);
  for (int n = 0; n <= 400; ++n) {
    CHECK(std::isfinite(p[n]));
    CHECK(p[n] >= 0.0);
  }
  CHECK(std::abs(p.sum() - 1.0) < 1e-9);
}
