#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sipmstat/detector_response.hpp"
#include "sipmstat/distributions.hpp"
#include "sipmstat/histogram.hpp"

using namespace sipmstat;

namespace {

// Closed form for the cascade matrix: with at most one secondary per element
// per stage, each initial avalanche heads an independent chain whose length
// is geometric, so column m is the m-fold convolution
// (n-1 choose n-m) eps^(n-m) (1-eps)^m. Derived independently of the
// recursion; used as its oracle.
double cascade_closed_form(double eps, int n, int m) {
  if (m == 0) return n == 0 ? 1.0 : 0.0;
  if (n < m) return 0.0;
  const int extra = n - m;
  const double log_choose = std::lgamma(n) - std::lgamma(extra + 1.0) -
                            std::lgamma(n - extra);
  return std::exp(log_choose + extra * std::log(eps) +
                  m * std::log1p(-eps));
}

}  // namespace

TEST_CASE("loss matrix basics") {
  const ResponseMatrix id = loss_matrix(1.0, 6);
  for (int n = 0; n <= 6; ++n) {
    for (int m = 0; m <= 6; ++m) {
      CHECK(id(n, m) == (n == m ? 1.0 : 0.0));
    }
  }

  // all 2^2 keep/drop patterns at eta = 0.5
  const ResponseMatrix half = loss_matrix(0.5, 4);
  CHECK(half(0, 2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(half(1, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(half(2, 2) == doctest::Approx(0.25).epsilon(1e-12));

  const ResponseMatrix weak = loss_matrix(0.013, 3);
  CHECK(weak(0, 1) == doctest::Approx(0.987).epsilon(1e-12));
  CHECK(weak(1, 1) == doctest::Approx(0.013).epsilon(1e-12));

  CHECK_THROWS_AS(loss_matrix(1.2, 3), std::invalid_argument);
  CHECK_THROWS_AS(loss_matrix(-0.1, 3), std::invalid_argument);
}

TEST_CASE("loss matrix is lower triangular in the count sense") {
  const ResponseMatrix m = loss_matrix(0.42, 12);
  for (int n = 0; n <= 12; ++n) {
    for (int col = 0; col < n; ++col) {
      CHECK(m(n, col) == 0.0);
    }
  }
  // columns are exact binomial distributions
  for (int col = 0; col <= 12; ++col) {
    CHECK(m.column_sum(col) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dark matrix basics") {
  const ResponseMatrix id = dark_matrix(0.0, 5);
  for (int n = 0; n <= 5; ++n) CHECK(id(n, n) == 1.0);

  const double lambda = 2.4e-3;
  const ResponseMatrix d = dark_matrix(lambda, 10);
  CHECK(d(1, 0) == doctest::Approx(lambda * std::exp(-lambda)).epsilon(1e-12));
  for (int n = 0; n < 3; ++n) {
    for (int m = n + 1; m <= 10; ++m) CHECK(d(n, m) == 0.0);
  }

  CHECK_THROWS_AS(dark_matrix(-1e-9, 3), std::invalid_argument);
}

TEST_CASE("dark columns sum to one given headroom") {
  const double lambda = 0.1;
  const int m_max = 10;
  const int n_max = m_max + dark_headroom(lambda);
  const ResponseMatrix d = dark_matrix(lambda, n_max);
  for (int col = 0; col <= m_max; ++col) {
    CHECK(d.column_sum(col) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("crosstalk hand-expanded entries") {
  for (const double eps : {0.04, 0.14, 0.22, 0.28, 0.5}) {
    const ResponseMatrix ct = crosstalk_matrix(eps, 8);
    CHECK(std::abs(ct(1, 1) - (1 - eps)) < 1e-12);
    CHECK(std::abs(ct(2, 1) - eps * (1 - eps)) < 1e-12);
    CHECK(std::abs(ct(3, 1) - eps * eps * (1 - eps)) < 1e-12);
    CHECK(std::abs(ct(2, 2) - (1 - eps) * (1 - eps)) < 1e-12);
    CHECK(std::abs(ct(3, 2) - 2 * eps * (1 - eps) * (1 - eps)) < 1e-12);
    CHECK(ct(0, 0) == 1.0);
    CHECK(ct(0, 1) == 0.0);
    CHECK(ct(1, 0) == 0.0);  // no crosstalk without a primary avalanche
  }
  const ResponseMatrix none = crosstalk_matrix(0.0, 5);
  for (int n = 0; n <= 5; ++n) {
    for (int m = 0; m <= 5; ++m) {
      CHECK(none(n, m) == (n == m ? 1.0 : 0.0));
    }
  }

  CHECK_THROWS_AS(crosstalk_matrix(1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(crosstalk_matrix(-0.1, 4), std::invalid_argument);
}

TEST_CASE("crosstalk recursion agrees with the chain closed form") {
  for (const double eps : {0.04, 0.28, 0.6}) {
    const ResponseMatrix ct = crosstalk_matrix(eps, 25);
    for (int m = 0; m <= 25; ++m) {
      for (int n = 0; n <= 25; ++n) {
        CHECK(std::abs(ct(n, m) - cascade_closed_form(eps, n, m)) < 1e-12);
      }
    }
  }
}

TEST_CASE("crosstalk column m=1 is geometric and sums to one") {
  const ResponseMatrix ct = crosstalk_matrix(0.28, 60);
  CHECK(std::abs(ct.column_sum(1) - 1.0) < 1e-9);
  for (int n = 1; n <= 20; ++n) {
    CHECK(ct(n, 1) ==
          doctest::Approx(std::pow(0.28, n - 1) * 0.72).epsilon(1e-10));
  }
}

TEST_CASE("identity cases compose to the identity") {
  const ResponseMatrix m = compose_response({1.0, 0.0, 0.0}, 8);
  for (int n = 0; n <= 8; ++n) {
    for (int col = 0; col <= 8; ++col) {
      CHECK(m(n, col) == doctest::Approx(n == col ? 1.0 : 0.0).epsilon(1e-15));
    }
  }
}

TEST_CASE("composition order matters") {
  const DetectorParams params{0.5, 0.1, 0.2};
  const int n_max = 20;
  const ResponseMatrix composed = compose_response(params, n_max);
  const Eigen::MatrixXd reversed = loss_matrix(params.eta, n_max).entries() *
                                   dark_matrix(params.lambda_dk, n_max).entries() *
                                   crosstalk_matrix(params.epsilon, n_max).entries();
  CHECK((composed.entries() - reversed).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("composite column 0 is the dark+crosstalk response to vacuum") {
  const DetectorParams params{0.3, 0.05, 0.2};
  const int n_max = 30;
  const ResponseMatrix composed = compose_response(params, n_max);
  const Eigen::MatrixXd dk_ct =
      crosstalk_matrix(params.epsilon, n_max).entries() *
      dark_matrix(params.lambda_dk, n_max).entries();
  for (int n = 0; n <= n_max; ++n) {
    CHECK(composed(n, 0) == doctest::Approx(dk_ct(n, 0)).epsilon(1e-12));
  }
}

TEST_CASE("column stochasticity across the parameter grid") {
  const int m_max = 20;
  for (const double eta : {0.0, 0.013, 0.5, 1.0}) {
    const ResponseMatrix loss = loss_matrix(eta, m_max);
    for (int col = 0; col <= m_max; ++col) {
      CHECK(std::abs(loss.column_sum(col) - 1.0) <= 1e-9);
    }
    for (const double lambda : {0.0, 2.4e-3, 0.1}) {
      for (const double eps : {0.0, 0.04, 0.14, 0.28}) {
        const DetectorParams params{eta, lambda, eps};
        const int n_max = m_max + response_headroom(params, m_max);
        const ResponseMatrix composed = compose_response(params, n_max);
        for (int col = 0; col <= m_max; ++col) {
          CHECK(std::abs(composed.column_sum(col) - 1.0) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("apply: identity and thinning identities") {
  const ProbVec p = thermal_pmf(2.0, 40);
  const ResponseMatrix id = loss_matrix(1.0, 40);
  const ProbVec same = apply(id, p);
  for (int n = 0; n <= 40; ++n) CHECK(same[n] == doctest::Approx(p[n]));

  // Poisson thinning: loss(eta) maps Poisson(n) to Poisson(eta n)
  const double eta = 0.3;
  const double n_bar = 4.0;
  const int n_max = adaptive_n_max_poisson(n_bar, 1e-15) + 10;
  const ProbVec thinned = apply(loss_matrix(eta, n_max), poisson_pmf(n_bar, n_max));
  const ProbVec expected = poisson_pmf(eta * n_bar, n_max);
  for (int n = 0; n <= n_max; ++n) {
    CHECK(std::abs(thinned[n] - expected[n]) <= 1e-9);
  }

  // thermal thinning
  const int t_max = adaptive_n_max_thermal(n_bar, 1e-15) + 10;
  const ProbVec th_thinned =
      apply(loss_matrix(eta, t_max), thermal_pmf(n_bar, t_max));
  const ProbVec th_expected = thermal_pmf(eta * n_bar, t_max);
  for (int n = 0; n <= t_max; ++n) {
    CHECK(std::abs(th_thinned[n] - th_expected[n]) <= 1e-9);
  }
}

TEST_CASE("mean maps: loss scales, dark shifts, crosstalk amplifies") {
  const double n_bar = 2.0;
  const int base = adaptive_n_max_poisson(n_bar, 1e-14);

  const ProbVec p = poisson_pmf(n_bar, base);
  const Moments m0 = moments(p);

  const Moments m_loss = moments(apply(loss_matrix(0.37, base), p));
  CHECK(std::abs(m_loss.mean - 0.37 * m0.mean) < 1e-8);

  const double lambda = 0.25;
  const int dark_max = base + dark_headroom(lambda, 1e-13);
  const Moments m_dark = moments(apply(dark_matrix(lambda, dark_max), p));
  CHECK(std::abs(m_dark.mean - (m0.mean + lambda)) < 1e-8);

  for (const double eps : {0.1, 0.28, 0.3}) {
    const int ct_max = base + crosstalk_headroom(eps, base, 1e-11);
    const Moments m_ct = moments(apply(crosstalk_matrix(eps, ct_max), p));
    CHECK(std::abs(m_ct.mean - m0.mean / (1.0 - eps)) < 1e-6);
  }
}

TEST_CASE("apply rejects oversized vectors") {
  const ResponseMatrix id = loss_matrix(1.0, 3);
  ProbVec p(std::vector<double>(10, 0.1));
  CHECK_THROWS_AS(apply(id, p), std::invalid_argument);
}

TEST_CASE("inversion round trip on clean vectors") {
  // identity response reproduces the input exactly
  const ProbVec p0 = thermal_pmf(0.8, 10);
  const Reconstruction id_rec = invert_reconstruct(loss_matrix(1.0, 10), p0);
  for (int n = 0; n <= 10; ++n) {
    CHECK(std::abs(id_rec.values[n] - p0[n]) < 1e-12);
  }

  for (const double eta : {0.3, 0.6, 0.9}) {
    const DetectorParams params{eta, 1e-3, 0.1};
    const int n_max = 12;
    const ResponseMatrix m = compose_response(params, n_max);
    const ProbVec src = thermal_pmf(1.2, n_max);
    const ProbVec measured = apply(m, src);
    const Reconstruction rec = invert_reconstruct(m, measured);
    for (int n = 0; n <= n_max; ++n) {
      CHECK(std::abs(rec.values[n] - src[n]) < 1e-6);
    }
    CHECK(rec.condition > 1.0);
  }
}

TEST_CASE("inversion with sampling noise yields negative entries") {
  // the documented hazard of naive unfolding at realistic statistics
  const DetectorParams params{0.013, 2.4e-3, 0.28};
  const int n_max = 5;
  const ResponseMatrix m = compose_response(params, n_max);
  ProbVec src = thermal_pmf(8.9, n_max);
  {
    // renormalize the heavily truncated source so the forward model is a pmf
    const double mass = src.sum();
    for (auto& v : src.probs) v /= mass;
  }
  const ProbVec measured = apply(m, src);
  const CountHistogram sampled = sample_counts(measured, 10000, 20260811);
  ProbVec noisy(std::vector<double>(n_max + 1, 0.0));
  for (std::size_t n = 0; n < sampled.counts.size(); ++n) {
    noisy[n] = static_cast<double>(sampled.counts[n]) / 10000.0;
  }
  const Reconstruction rec = invert_reconstruct(m, noisy);
  double min_entry = 1.0;
  for (double v : rec.values) min_entry = std::min(min_entry, v);
  CHECK(min_entry < 0.0);
}

TEST_CASE("inversion refuses ill-conditioned systems") {
  const ResponseMatrix m = loss_matrix(0.013, 20);
  const ProbVec measured = apply(m, thermal_pmf(1.0, 20));
  CHECK_THROWS_AS(invert_reconstruct(m, measured), IllConditionedError);
  try {
    invert_reconstruct(m, measured);
  } catch (const IllConditionedError& e) {
    CHECK(e.condition > 1e12);
  }
}

TEST_CASE("matrix dump/load round trip") {
  const ResponseMatrix m = compose_response({0.5, 0.01, 0.2}, 9);
  std::stringstream ss;
  save_matrix(ss, m);
  const ResponseMatrix loaded = load_matrix(ss);
  CHECK(loaded.kind() == MatrixKind::composite);
  CHECK(loaded.n_max() == 9);
  for (int n = 0; n <= 9; ++n) {
    for (int col = 0; col <= 9; ++col) {
      CHECK(loaded(n, col) == m(n, col));
    }
  }
}

TEST_CASE("detector params validation") {
  CHECK_THROWS_AS((DetectorParams{1.5, 0.0, 0.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((DetectorParams{0.5, -0.1, 0.0}).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS((DetectorParams{0.5, 0.0, 1.0}).validate(),
                  std::invalid_argument);
  CHECK_NOTHROW((DetectorParams{0.5, 0.1, 0.99}).validate());
}
