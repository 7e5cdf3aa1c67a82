#include "sipmstat/distributions.hpp"

#include <cmath>
#include <stdexcept>

namespace sipmstat {

namespace {

// Above this mode count the negative binomial is numerically
// indistinguishable from Poisson and the lgamma difference loses precision.
constexpr double kPoissonModeLimit = 1e12;

ProbVec vacuum(int n_max) {
  ProbVec p(std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0));
  p[0] = 1.0;
  return p;
}

void check_n_max(int n_max) {
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
}

}  // namespace

ProbVec thermal_pmf(double n_bar, int n_max) {
  if (!(n_bar >= 0.0)) throw std::invalid_argument("thermal_pmf: n_bar < 0");
  check_n_max(n_max);
  if (n_bar == 0.0) return vacuum(n_max);

  const double log_ratio = std::log(n_bar) - std::log1p(n_bar);
  ProbVec p(std::vector<double>(static_cast<std::size_t>(n_max) + 1));
  for (int n = 0; n <= n_max; ++n) {
    p[n] = std::exp(n * log_ratio - std::log1p(n_bar));
  }
  return p;
}

ProbVec poisson_pmf(double n_bar, int n_max) {
  if (!(n_bar >= 0.0)) throw std::invalid_argument("poisson_pmf: n_bar < 0");
  check_n_max(n_max);
  if (n_bar == 0.0) return vacuum(n_max);

  const double log_nbar = std::log(n_bar);
  ProbVec p(std::vector<double>(static_cast<std::size_t>(n_max) + 1));
  for (int n = 0; n <= n_max; ++n) {
    p[n] = std::exp(-n_bar + n * log_nbar - std::lgamma(n + 1.0));
  }
  return p;
}

ProbVec negative_binomial_pmf(const ModeModel& model, int n_max) {
  const double n_bar = model.n_bar;
  const double s = model.s;
  if (!(s > 0.0)) throw std::invalid_argument("negative_binomial_pmf: s <= 0");
  if (!(n_bar >= 0.0)) {
    throw std::invalid_argument("negative_binomial_pmf: n_bar < 0");
  }
  check_n_max(n_max);
  if (n_bar == 0.0) return vacuum(n_max);
  if (s >= kPoissonModeLimit) return poisson_pmf(n_bar, n_max);

  // log C(s+n-1, s-1) = lgamma(s+n) - lgamma(s) - lgamma(n+1)
  const double lg_s = std::lgamma(s);
  const double log_p0 = -s * std::log1p(n_bar / s);
  const double log_ratio = -std::log1p(s / n_bar);
  ProbVec p(std::vector<double>(static_cast<std::size_t>(n_max) + 1));
  for (int n = 0; n <= n_max; ++n) {
    const double log_comb = std::lgamma(s + n) - lg_s - std::lgamma(n + 1.0);
    p[n] = std::exp(log_comb + log_p0 + n * log_ratio);
  }
  return p;
}

int adaptive_n_max_thermal(double n_bar, double tol) {
  if (!(n_bar >= 0.0)) throw std::invalid_argument("n_bar < 0");
  if (n_bar == 0.0) return 0;
  // Tail mass beyond N is (n_bar / (1 + n_bar))^(N+1).
  const double log_q = std::log(n_bar) - std::log1p(n_bar);
  const int n = static_cast<int>(std::ceil(std::log(tol) / log_q)) - 1;
  return n < 0 ? 0 : n;
}

namespace {

// Walks the pmf via its term ratio until the remaining mass drops below tol.
template <typename Ratio>
int adaptive_from_ratio(double p0, Ratio ratio, double tol) {
  double cum = p0;
  double p = p0;
  int n = 0;
  // The crude geometric tail bound p/(1 - r) is only valid once the ratio
  // r is below 1 (past the mode); keep going until both hold.
  while (n < 100000) {
    const double r = ratio(n);
    if (cum >= 1.0 - tol && r < 1.0 && p * r / (1.0 - r) < tol) break;
    p *= r;
    cum += p;
    ++n;
  }
  return n;
}

}  // namespace

int adaptive_n_max_poisson(double n_bar, double tol) {
  if (!(n_bar >= 0.0)) throw std::invalid_argument("n_bar < 0");
  if (n_bar == 0.0) return 0;
  return adaptive_from_ratio(
      std::exp(-n_bar), [n_bar](int n) { return n_bar / (n + 1.0); }, tol);
}

int adaptive_n_max_negative_binomial(const ModeModel& model, double tol) {
  if (!(model.s > 0.0)) throw std::invalid_argument("s <= 0");
  if (!(model.n_bar >= 0.0)) throw std::invalid_argument("n_bar < 0");
  if (model.n_bar == 0.0) return 0;
  if (model.s >= kPoissonModeLimit) {
    return adaptive_n_max_poisson(model.n_bar, tol);
  }
  const double s = model.s;
  const double n_bar = model.n_bar;
  const double p0 = std::exp(-s * std::log1p(n_bar / s));
  return adaptive_from_ratio(
      p0,
      [s, n_bar](int n) { return (s + n) / (n + 1.0) * n_bar / (s + n_bar); },
      tol);
}

}  // namespace sipmstat
