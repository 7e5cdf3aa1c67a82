#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sipmstat/estimation.hpp"
#include "synthetic.hpp"

using namespace sipmstat;
using sipmstat::testing::synthetic_counts;

namespace {

double combined_err(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace

TEST_CASE("measured model matches the full matrix chain") {
  const DetectorParams params{0.3, 0.05, 0.15};
  const int src_n_max = 60;
  const int k_max = 25;
  const ProbVec src = thermal_pmf(1.5, src_n_max);

  const ProbVec full = apply(compose_response(params, src_n_max), src);
  const MeasuredModel model(params, k_max, src_n_max);
  const Eigen::VectorXd block = model(src);
  for (int n = 0; n <= k_max; ++n) {
    CHECK(std::abs(block(n) - full[n]) < 1e-12);
  }
}

TEST_CASE("heralded efficiency ratio and binomial error") {
  CHECK(heralded_efficiency(0, 1000).value == 0.0);
  CHECK(heralded_efficiency(13, 1000).value == doctest::Approx(0.013));

  const Ratio r = heralded_efficiency(500, 1000);
  CHECK(r.value == doctest::Approx(0.5));
  CHECK(r.std_error == doctest::Approx(0.0158).epsilon(1e-2));

  CHECK_THROWS_AS(heralded_efficiency(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(heralded_efficiency(11, 10), std::invalid_argument);
}

TEST_CASE("dark calibration round trip at the reported settings") {
  struct Setting {
    double lambda, eps;
    std::uint64_t seed;
  };
  for (const Setting s : {Setting{1.0e-3, 0.140, 11}, Setting{2.5e-4, 0.040, 12}}) {
    const int k_max = 12;
    const ProbVec model_col =
        apply(crosstalk_matrix(s.eps, k_max), poisson_pmf(s.lambda, k_max));
    CountHistogram h = sample_counts(model_col, 10000000, s.seed);
    h.shrink();

    const FitResult fit = fit_dark_calibration(h);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.value("lambda_dk") - s.lambda) <=
          2.0 * fit.std_error("lambda_dk"));
    CHECK(std::abs(fit.value("epsilon") - s.eps) <=
          2.0 * fit.std_error("epsilon"));
    REQUIRE(fit.gof.has_value());
    CHECK(fit.gof->dof >= 1);
  }
}

TEST_CASE("dark calibration flags the degenerate all-vacuum histogram") {
  CountHistogram h(std::vector<std::int64_t>{100000});
  const FitResult fit = fit_dark_calibration(h);
  CHECK(fit.value("lambda_dk") < 1e-6);
  CHECK((fit.has_flag("lambda_dk_boundary") ||
         fit.has_flag("epsilon_unidentifiable")));
}

TEST_CASE("empty histograms are rejected") {
  CountHistogram empty;
  CHECK_THROWS_AS(fit_dark_calibration(empty), std::invalid_argument);
  CountHistogram zeros(std::vector<std::int64_t>{0, 0, 0});
  CHECK_THROWS_AS(fit_dark_calibration(zeros), std::invalid_argument);
  CHECK_THROWS_AS(fit_source(zeros, {0.5, 0.0, 0.0}, SourceFamily::thermal),
                  std::invalid_argument);
}

TEST_CASE("thermal source fit recovers n_bar through heavy distortion") {
  const DetectorParams params{6e-3, 2.4e-3, 0.280};
  const double n_bar_true = 8.9;
  const CountHistogram h = synthetic_counts(params, SourceFamily::thermal,
                                            n_bar_true, 1.0, 1000000, 21);

  const FitResult fit = fit_source(h, params, SourceFamily::thermal);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.value("n_bar") - n_bar_true) <=
        2.0 * fit.std_error("n_bar"));
}

TEST_CASE("fit_source requires a nonzero efficiency") {
  const CountHistogram h(std::vector<std::int64_t>{10, 5, 1});
  CHECK_THROWS_AS(fit_source(h, {0.0, 0.0, 0.0}, SourceFamily::thermal),
                  std::invalid_argument);
}

TEST_CASE("fit_source flags a source driven to the zero boundary") {
  const CountHistogram dark_only(std::vector<std::int64_t>{100000});
  const FitResult fit =
      fit_source(dark_only, {0.5, 0.0, 0.0}, SourceFamily::thermal);
  CHECK(fit.value("n_bar") < 1e-3);
  CHECK(fit.has_flag("n_bar_boundary"));
}

TEST_CASE("negative binomial source fit recovers the mode count") {
  const DetectorParams params{0.013, 1.69e-3, 0.27};
  const double n_bar_true = 15.0;
  const double s_true = 5.5;
  const CountHistogram h = synthetic_counts(params, SourceFamily::negbinom,
                                            n_bar_true, s_true, 10000000, 31);

  const FitResult fit = fit_source(h, params, SourceFamily::negbinom);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.value("s") - s_true) <= 2.0 * fit.std_error("s"));
  CHECK(std::abs(fit.value("n_bar") - n_bar_true) <=
        2.0 * fit.std_error("n_bar"));
}

TEST_CASE("model selection labels single-mode data as thermal-like") {
  const DetectorParams params{4.9e-3, 1.0e-3, 0.140};
  const CountHistogram h =
      synthetic_counts(params, SourceFamily::thermal, 8.8, 1.0, 2000000, 41);

  const ModelSelection sel = model_selection(h, params);
  CHECK(sel.negbinom.value("s") < 2.0);
  CHECK(sel.label != "poissonian");
  // thermal explains the data at least as well as poisson
  CHECK(sel.thermal.log_likelihood > sel.poisson.log_likelihood);
}

TEST_CASE("model selection labels many-mode data as poissonian") {
  const DetectorParams params{0.02, 3e-3, 0.22};
  const CountHistogram h =
      synthetic_counts(params, SourceFamily::negbinom, 20.0, 23.0, 4000000, 51);

  const ModelSelection sel = model_selection(h, params);
  CHECK(sel.label == "poissonian");
}

TEST_CASE("standard errors shrink like one over root N") {
  const DetectorParams params{6e-3, 2.4e-3, 0.280};
  std::vector<double> scaled;
  for (const std::int64_t trials : {10000LL, 100000LL, 1000000LL, 10000000LL}) {
    const CountHistogram h = synthetic_counts(params, SourceFamily::thermal,
                                              8.9, 1.0, trials, 61);
    const FitResult fit = fit_source(h, params, SourceFamily::thermal);
    REQUIRE(fit.converged);
    scaled.push_back(fit.std_error("n_bar") *
                     std::sqrt(static_cast<double>(trials)));
  }
  const double lo = *std::min_element(scaled.begin(), scaled.end());
  const double hi = *std::max_element(scaled.begin(), scaled.end());
  CHECK(hi / lo < 2.0);
}

TEST_CASE("fits are insensitive to extra truncation headroom") {
  const DetectorParams params{6e-3, 2.4e-3, 0.280};
  const CountHistogram h =
      synthetic_counts(params, SourceFamily::thermal, 8.9, 1.0, 1000000, 71);

  SourceFitOptions narrow;
  narrow.n_max = 400;
  SourceFitOptions wide;
  wide.n_max = 410;
  const FitResult a = fit_source(h, params, SourceFamily::thermal, narrow);
  const FitResult b = fit_source(h, params, SourceFamily::thermal, wide);
  CHECK(std::abs(a.value("n_bar") - b.value("n_bar")) <
        a.std_error("n_bar"));
}

TEST_CASE("goodness-of-fit p-values are roughly uniform under the model") {
  const DetectorParams params{0.5, 0.01, 0.1};
  const ProbVec truth =
      sipmstat::testing::measured_pmf(params, SourceFamily::thermal, 2.0, 1.0, 45);

  std::vector<double> p_values;
  for (int replica = 0; replica < 200; ++replica) {
    CountHistogram h =
        sample_counts(truth, 100000, 1000 + static_cast<std::uint64_t>(replica));
    h.shrink();
    const FitResult fit = fit_source(h, params, SourceFamily::thermal);
    REQUIRE(fit.gof.has_value());
    p_values.push_back(fit.gof->p_value);
  }
  std::sort(p_values.begin(), p_values.end());
  double d_stat = 0.0;
  const double n = static_cast<double>(p_values.size());
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    const double hi = (i + 1.0) / n - p_values[i];
    const double lo = p_values[i] - i / n;
    d_stat = std::max({d_stat, hi, lo});
  }
  // Kolmogorov-Smirnov critical value at level 0.01
  const double critical = 1.628 / (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
  CHECK(d_stat < critical);
}

TEST_CASE("bootstrap errors agree with information-matrix errors") {
  const DetectorParams params{0.5, 0.01, 0.1};
  const CountHistogram h =
      synthetic_counts(params, SourceFamily::thermal, 2.0, 1.0, 100000, 81);
  const FitResult fit = fit_source(h, params, SourceFamily::thermal);
  const auto boot =
      bootstrap_source_errors(h, params, SourceFamily::thermal, 40, 7);
  REQUIRE(boot.size() == 1);
  CHECK(boot[0].name == "n_bar");
  CHECK(boot[0].std_error / fit.std_error("n_bar") > 0.5);
  CHECK(boot[0].std_error / fit.std_error("n_bar") < 2.0);
}

TEST_CASE("stimulation fit: noiseless round trips") {
  const std::vector<double> intensities{1, 5, 10, 20, 40, 70, 100, 150, 200, 260};
  struct Truth {
    double s, alpha;
  };
  for (const Truth t :
       {Truth{1.1, 0.08}, Truth{1.4, 0.10}, Truth{6.3, 0.08}, Truth{23.0, 0.06}}) {
    std::vector<StimPoint> points;
    for (const double intensity : intensities) {
      const double sh = std::sinh(t.alpha * std::sqrt(intensity));
      points.push_back({intensity, t.s * sh * sh, 1.0});
    }
    const FitResult fit = fit_stimulation(points);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.value("s") - t.s) < 1e-6 * t.s);
    CHECK(std::abs(fit.value("alpha") - t.alpha) < 1e-6 * t.alpha);
  }
}

TEST_CASE("stimulation model is pinned to zero at zero pump") {
  std::vector<StimPoint> points{{0.0, 0.0, 0.5}};
  for (const double intensity : {10.0, 40.0, 90.0, 160.0, 250.0}) {
    const double sh = std::sinh(0.08 * std::sqrt(intensity));
    points.push_back({intensity, 6.3 * sh * sh, 0.5});
  }
  const FitResult fit = fit_stimulation(points);
  REQUIRE(fit.converged);
  // whatever the parameters, the fitted curve passes through the origin
  const double s = fit.value("s");
  const double alpha = fit.value("alpha");
  CHECK(s * std::sinh(alpha * 0.0) == 0.0);
  CHECK(std::abs(fit.value("s") - 6.3) < 1e-5);
}

TEST_CASE("stimulation fit under multiplicative noise") {
  const std::vector<double> intensities{1, 5, 10, 20, 40, 70, 100, 150, 200, 260};
  Rng rng(123, 9);
  std::vector<StimPoint> points;
  for (const double intensity : intensities) {
    const double sh = std::sinh(0.08 * std::sqrt(intensity));
    const double clean = 1.1 * sh * sh;
    const double u1 = rng.next_double();
    const double u2 = rng.next_double();
    const double gauss =
        std::sqrt(-2.0 * std::log(u1 + 1e-300)) * std::cos(6.283185307179586 * u2);
    points.push_back({intensity, clean * (1.0 + 0.05 * gauss), 0.05 * clean});
  }
  const FitResult fit = fit_stimulation(points);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.value("s") - 1.1) < 0.5);
}

TEST_CASE("stimulation fit validation errors") {
  std::vector<StimPoint> two{{1.0, 0.1, 0.01}, {2.0, 0.2, 0.01}};
  CHECK_THROWS_AS(fit_stimulation(two), std::invalid_argument);
  std::vector<StimPoint> flat{{5.0, 0.1, 0.01}, {5.0, 0.11, 0.01}, {5.0, 0.09, 0.01}};
  CHECK_THROWS_AS(fit_stimulation(flat), std::invalid_argument);
}

TEST_CASE("linear-regime data pins only the product s*alpha^2") {
  const double s_true = 6.3;
  const double alpha_true = 0.08;
  std::vector<StimPoint> points;
  for (const double intensity : {0.25, 0.5, 0.75, 1.0, 1.25, 1.5}) {
    const double sh = std::sinh(alpha_true * std::sqrt(intensity));
    points.push_back({intensity, s_true * sh * sh, 1e-4});
  }
  const FitResult fit = fit_stimulation(points);
  CHECK(fit.has_flag("linear_regime_degenerate"));
  const double product_true = s_true * alpha_true * alpha_true;
  CHECK(std::abs(fit.value("s_alpha_sq") - product_true) <
        0.05 * product_true);
}
