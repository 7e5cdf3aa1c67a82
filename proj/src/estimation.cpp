#include "sipmstat/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sipmstat/simplex.hpp"

namespace sipmstat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kSrcTruncationCap = 8000;
constexpr double kSrcTailBudget = 1e-6;

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double histogram_mean(const CountHistogram& h) {
  const double t = static_cast<double>(h.total());
  double m = 0.0;
  for (std::size_t n = 0; n < h.counts.size(); ++n) {
    m += static_cast<double>(n) * static_cast<double>(h.counts[n]);
  }
  return m / t;
}

/// Multinomial negative log-likelihood up to the constant term.
double negative_log_likelihood(const CountHistogram& h,
                               const Eigen::VectorXd& p) {
  double nll = 0.0;
  for (std::size_t n = 0; n < h.counts.size(); ++n) {
    const std::int64_t c = h.counts[n];
    if (c == 0) continue;
    const double pn = p(static_cast<int>(n));
    if (!(pn > 0.0)) return kInf;
    nll -= static_cast<double>(c) * std::log(pn);
  }
  return nll;
}

/// Pearson chi-square of the counts against model probabilities covering
/// the observed range; the mass beyond it forms an unobserved tail cell.
/// Cells are pooled right-to-left until every expected count is >= 5.
std::optional<GofStats> pearson_gof(const CountHistogram& h,
                                    const Eigen::VectorXd& p, int n_free,
                                    bool include_tail_cell) {
  const double total = static_cast<double>(h.total());
  std::vector<double> expected;
  std::vector<double> observed;
  double model_mass = 0.0;
  for (std::size_t n = 0; n < h.counts.size(); ++n) {
    const double pn = p(static_cast<int>(n));
    expected.push_back(total * pn);
    observed.push_back(static_cast<double>(h.counts[n]));
    model_mass += pn;
  }
  if (include_tail_cell && model_mass < 1.0) {
    expected.push_back(total * (1.0 - model_mass));
    observed.push_back(0.0);
  }

  for (std::size_t i = expected.size(); i-- > 1;) {
    if (expected[i] < 5.0) {
      expected[i - 1] += expected[i];
      observed[i - 1] += observed[i];
      expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(i));
      observed.erase(observed.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  const int dof = static_cast<int>(expected.size()) - 1 - n_free;
  if (dof < 1) return std::nullopt;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] <= 0.0) return std::nullopt;
    const double d = observed[i] - expected[i];
    chi2 += d * d / expected[i];
  }
  const double p_value = boost::math::gamma_q(0.5 * dof, 0.5 * chi2);
  return GofStats{chi2, dof, p_value};
}

Eigen::MatrixXd numeric_hessian(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& theta) {
  const int dim = static_cast<int>(theta.size());
  Eigen::VectorXd step(dim);
  for (int i = 0; i < dim; ++i) {
    step(i) = std::max(std::abs(theta(i)) * 1e-4, 1e-12);
  }
  const double f0 = f(theta);
  Eigen::MatrixXd hess(dim, dim);
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up(i) += step(i);
    down(i) -= step(i);
    hess(i, i) = (f(up) - 2.0 * f0 + f(down)) / (step(i) * step(i));
    for (int j = i + 1; j < dim; ++j) {
      Eigen::VectorXd pp = theta, pm = theta, mp = theta, mm = theta;
      pp(i) += step(i); pp(j) += step(j);
      pm(i) += step(i); pm(j) -= step(j);
      mp(i) -= step(i); mp(j) += step(j);
      mm(i) -= step(i); mm(j) -= step(j);
      hess(i, j) = hess(j, i) =
          (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step(i) * step(j));
    }
  }
  return hess;
}

/// Inverse observed information; falls back to infinite errors when the
/// Hessian is not positive definite.
Eigen::MatrixXd covariance_from_hessian(const Eigen::MatrixXd& hess,
                                        std::vector<std::string>& flags) {
  const int dim = static_cast<int>(hess.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(hess);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    bool ok = true;
    for (int i = 0; i < dim; ++i) {
      if (!(cov(i, i) > 0.0) || !std::isfinite(cov(i, i))) ok = false;
    }
    if (ok) return cov;
  }
  flags.push_back("information_matrix_singular");
  return Eigen::MatrixXd::Constant(dim, dim, kInf);
}

std::vector<FitParam> params_with_errors(
    const std::vector<std::string>& names, const Eigen::VectorXd& values,
    const Eigen::MatrixXd& cov) {
  std::vector<FitParam> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double var = cov(static_cast<int>(i), static_cast<int>(i));
    const double se = var >= 0.0 ? std::sqrt(var) : kInf;
    out.push_back({names[i], values(static_cast<int>(i)), se});
  }
  return out;
}

void require_events(const CountHistogram& h) {
  if (h.counts.empty() || h.total() < 1) {
    throw std::invalid_argument("histogram has no events");
  }
}

}  // namespace

double FitResult::value(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p.value;
  }
  throw std::invalid_argument("no fit parameter named " + name);
}

double FitResult::std_error(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p.std_error;
  }
  throw std::invalid_argument("no fit parameter named " + name);
}

bool FitResult::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

std::string to_string(SourceFamily family) {
  switch (family) {
    case SourceFamily::thermal: return "thermal";
    case SourceFamily::negbinom: return "negbinom";
    case SourceFamily::poisson: return "poisson";
  }
  return "unknown";
}

SourceFamily source_family_from_string(const std::string& name) {
  if (name == "thermal") return SourceFamily::thermal;
  if (name == "negbinom") return SourceFamily::negbinom;
  if (name == "poisson") return SourceFamily::poisson;
  throw std::invalid_argument("unknown source family: " + name);
}

MeasuredModel::MeasuredModel(const DetectorParams& params, int k_max,
                             int src_n_max) {
  params.validate();
  if (k_max < 0 || src_n_max < 0) {
    throw std::invalid_argument("MeasuredModel: negative truncation");
  }
  const int k_size = k_max + 1;
  const int src_size = src_n_max + 1;

  // Loss block: binomial thinning of m true photons down to n <= k_max.
  Eigen::MatrixXd thin = Eigen::MatrixXd::Zero(k_size, src_size);
  if (params.eta == 1.0) {
    for (int m = 0; m < std::min(k_size, src_size); ++m) thin(m, m) = 1.0;
  } else if (params.eta == 0.0) {
    thin.row(0).setOnes();
  } else {
    const double log_eta = std::log(params.eta);
    const double log_keep = std::log1p(-params.eta);
    for (int m = 0; m < src_size; ++m) {
      const int n_hi = std::min(m, k_max);
      for (int n = 0; n <= n_hi; ++n) {
        thin(n, m) = std::exp(std::lgamma(m + 1.0) - std::lgamma(n + 1.0) -
                              std::lgamma(m - n + 1.0) + n * log_eta +
                              (m - n) * log_keep);
      }
    }
  }

  const ResponseMatrix dark = dark_matrix(params.lambda_dk, k_max);
  const ResponseMatrix ct = crosstalk_matrix(params.epsilon, k_max);
  block_ = ct.entries() * (dark.entries() * thin);
}

Eigen::VectorXd MeasuredModel::operator()(const ProbVec& src) const {
  const int src_size = static_cast<int>(block_.cols());
  if (static_cast<int>(src.size()) > src_size) {
    throw std::invalid_argument("MeasuredModel: source pmf too long");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(src_size);
  for (std::size_t i = 0; i < src.size(); ++i) v(static_cast<int>(i)) = src[i];
  return block_ * v;
}

namespace {

ProbVec family_pmf(SourceFamily family, const ModeModel& source, int n_max) {
  switch (family) {
    case SourceFamily::thermal: return thermal_pmf(source.n_bar, n_max);
    case SourceFamily::negbinom: return negative_binomial_pmf(source, n_max);
    case SourceFamily::poisson: return poisson_pmf(source.n_bar, n_max);
  }
  throw std::logic_error("unreachable");
}

int family_adaptive_n_max(SourceFamily family, const ModeModel& source,
                          double tol) {
  switch (family) {
    case SourceFamily::thermal: return adaptive_n_max_thermal(source.n_bar, tol);
    case SourceFamily::negbinom:
      return adaptive_n_max_negative_binomial(source, tol);
    case SourceFamily::poisson: return adaptive_n_max_poisson(source.n_bar, tol);
  }
  throw std::logic_error("unreachable");
}

}  // namespace

ProbVec measured_distribution(const DetectorParams& params,
                              SourceFamily family, const ModeModel& source,
                              int k_max, double tol) {
  params.validate();
  const int src_n_max = family_adaptive_n_max(family, source, 0.01 * tol);
  const ProbVec src = family_pmf(family, source, src_n_max);

  int k = k_max >= 0 ? k_max : std::max(32, src_n_max / 4);
  for (;;) {
    const MeasuredModel model(params, k, src_n_max);
    const Eigen::VectorXd p = model(src);
    ProbVec out(std::vector<double>(p.data(), p.data() + p.size()));
    if (k_max >= 0 || out.sum() >= 1.0 - tol) return out;
    if (k > 100000) {
      throw std::runtime_error(
          "measured_distribution: truncation did not converge");
    }
    k *= 2;
  }
}

FitResult fit_dark_calibration(const CountHistogram& h, int n_max) {
  require_events(h);
  CountHistogram data = h;
  data.shrink();
  const int k_max =
      n_max > 0 ? std::max<int>(n_max, static_cast<int>(data.counts.size()) - 1)
                : static_cast<int>(data.counts.size()) - 1;
  const double mean = histogram_mean(data);

  // u = (log lambda, logit epsilon)
  auto unpack = [](const Eigen::VectorXd& u) {
    return std::pair<double, double>{std::exp(u(0)), expit(u(1))};
  };
  auto model_probs = [k_max](double lambda, double eps) {
    const ResponseMatrix ct = crosstalk_matrix(eps, k_max);
    const ProbVec pois = poisson_pmf(lambda, k_max);
    return apply(ct, pois);
  };
  auto objective = [&](const Eigen::VectorXd& u) {
    const auto [lambda, eps] = unpack(u);
    if (!(lambda > 1e-12 && lambda < 20.0 && eps < 0.97)) return kInf;
    const ProbVec p = model_probs(lambda, eps);
    Eigen::VectorXd pv =
        Eigen::Map<const Eigen::VectorXd>(p.probs.data(), p.size());
    return negative_log_likelihood(data, pv);
  };

  SimplexResult best;
  best.value = kInf;
  for (const double eps0 : {0.02, 0.10, 0.25}) {
    const double lambda0 =
        std::clamp(mean * (1.0 - eps0), 1e-8, 5.0);
    Eigen::VectorXd u0(2);
    u0 << std::log(lambda0), logit(std::clamp(eps0, 1e-6, 0.9));
    Eigen::VectorXd step(2);
    step << 0.7, 0.7;
    const SimplexResult r = nelder_mead(objective, u0, step);
    if (r.value < best.value) best = r;
  }

  FitResult result;
  const auto [lambda_hat, eps_hat] = unpack(best.x);
  result.converged = best.converged && std::isfinite(best.value);
  result.log_likelihood = -best.value;
  if (lambda_hat < 1e-9) result.flags.push_back("lambda_dk_boundary");

  Eigen::VectorXd theta(2);
  theta << lambda_hat, eps_hat;
  auto nll_theta = [&](const Eigen::VectorXd& t) {
    if (!(t(0) > 0.0 && t(1) >= 0.0 && t(1) < 1.0)) return kInf;
    const ProbVec p = model_probs(t(0), t(1));
    Eigen::VectorXd pv =
        Eigen::Map<const Eigen::VectorXd>(p.probs.data(), p.size());
    return negative_log_likelihood(data, pv);
  };
  result.covariance =
      covariance_from_hessian(numeric_hessian(nll_theta, theta), result.flags);
  result.params = params_with_errors({"lambda_dk", "epsilon"}, theta,
                                     result.covariance);
  if (!std::isfinite(result.std_error("epsilon"))) {
    result.flags.push_back("epsilon_unidentifiable");
  }

  const ProbVec p_fit = model_probs(lambda_hat, eps_hat);
  Eigen::VectorXd pv =
      Eigen::Map<const Eigen::VectorXd>(p_fit.probs.data(), p_fit.size());
  result.gof = pearson_gof(data, pv, 2, true);
  return result;
}

namespace {

struct SourceObjectiveSetup {
  MeasuredModel model;
  double n_bar_init = 0.0;
  double log_n_bar_lo = 0.0;
  double log_n_bar_hi = 0.0;
  int src_n_max = 0;
};

SourceObjectiveSetup make_source_setup(const CountHistogram& data,
                                       const DetectorParams& params,
                                       SourceFamily family,
                                       const SourceFitOptions& options) {
  params.validate();
  if (!(params.eta > 0.0)) {
    throw std::invalid_argument(
        "fit_source: eta must be > 0 for the source to be identifiable");
  }
  const int k_max = static_cast<int>(data.counts.size()) - 1;
  const double mean = histogram_mean(data);
  const double n_bar_init = std::clamp(
      (mean * (1.0 - params.epsilon) - params.lambda_dk) / params.eta, 1e-4,
      1e5);
  const double lo = std::max(n_bar_init / 64.0, 1e-8);
  const double hi = std::min(n_bar_init * 64.0, 1e5);

  int src_n_max;
  if (options.n_max > 0) {
    src_n_max = options.n_max;
  } else {
    const double probe = std::min(hi, 400.0);
    int adaptive = 0;
    switch (family) {
      case SourceFamily::thermal:
        adaptive = adaptive_n_max_thermal(probe, 1e-10);
        break;
      case SourceFamily::negbinom:
        adaptive = adaptive_n_max_negative_binomial({probe, 0.5}, 1e-10);
        break;
      case SourceFamily::poisson:
        adaptive = adaptive_n_max_poisson(probe, 1e-10);
        break;
    }
    src_n_max = std::min(adaptive + 10, kSrcTruncationCap);
  }
  src_n_max = std::max(src_n_max, k_max);

  return {MeasuredModel(params, k_max, src_n_max), n_bar_init, std::log(lo),
          std::log(hi), src_n_max};
}

}  // namespace

FitResult fit_source(const CountHistogram& h, const DetectorParams& params,
                     SourceFamily family, const SourceFitOptions& options) {
  require_events(h);
  CountHistogram data = h;
  data.shrink();
  const SourceObjectiveSetup setup =
      make_source_setup(data, params, family, options);
  const bool two_params = family == SourceFamily::negbinom;
  const double log_s_lo = std::log(0.05);
  const double log_s_hi = std::log(5e3);

  auto probs_for = [&](double n_bar, double s) -> std::optional<Eigen::VectorXd> {
    const ProbVec src = family_pmf(family, {n_bar, s}, setup.src_n_max);
    if (src.sum() < 1.0 - kSrcTailBudget) return std::nullopt;  // truncation unsafe
    Eigen::VectorXd p = setup.model(src);
    if (options.truncated_support) {
      const double mass = p.sum();
      if (!(mass > 0.0)) return std::nullopt;
      p /= mass;
    }
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& u) {
    const double log_n_bar = u(0);
    if (log_n_bar < setup.log_n_bar_lo || log_n_bar > setup.log_n_bar_hi) {
      return kInf;
    }
    double s = 1.0;
    if (two_params) {
      if (u(1) < log_s_lo || u(1) > log_s_hi) return kInf;
      s = std::exp(u(1));
    }
    const auto p = probs_for(std::exp(log_n_bar), s);
    if (!p) return kInf;
    return negative_log_likelihood(data, *p);
  };

  std::vector<Eigen::VectorXd> starts;
  for (const double factor : {0.25, 1.0, 4.0}) {
    const double log_n0 =
        std::clamp(std::log(setup.n_bar_init * factor),
                   setup.log_n_bar_lo, setup.log_n_bar_hi);
    if (two_params) {
      for (const double s0 : {0.7, 2.0, 6.0, 25.0}) {
        Eigen::VectorXd u(2);
        u << log_n0, std::log(s0);
        starts.push_back(u);
      }
    } else {
      Eigen::VectorXd u(1);
      u << log_n0;
      starts.push_back(u);
    }
  }

  SimplexResult best;
  best.value = kInf;
  for (const auto& u0 : starts) {
    Eigen::VectorXd step = Eigen::VectorXd::Constant(u0.size(), 0.5);
    const SimplexResult r = nelder_mead(objective, u0, step);
    if (r.value < best.value) best = r;
  }

  FitResult result;
  result.converged = best.converged && std::isfinite(best.value);
  if (!std::isfinite(best.value)) {
    result.flags.push_back("no_feasible_point");
    result.params = {{"n_bar", std::exp(setup.log_n_bar_lo), kInf}};
    if (two_params) result.params.push_back({"s", 1.0, kInf});
    result.covariance = Eigen::MatrixXd::Constant(
        two_params ? 2 : 1, two_params ? 2 : 1, kInf);
    return result;
  }
  result.log_likelihood = -best.value;

  const double n_bar_hat = std::exp(best.x(0));
  const double s_hat = two_params ? std::exp(best.x(1)) : 1.0;
  if (best.x(0) < setup.log_n_bar_lo + 1e-6) {
    result.flags.push_back("n_bar_boundary");
  }
  if (two_params && (best.x(1) < log_s_lo + 1e-6 || best.x(1) > log_s_hi - 1e-6)) {
    result.flags.push_back("s_boundary");
  }

  const int dim = two_params ? 2 : 1;
  Eigen::VectorXd theta(dim);
  theta(0) = n_bar_hat;
  if (two_params) theta(1) = s_hat;
  auto nll_theta = [&](const Eigen::VectorXd& t) {
    if (!(t(0) > 0.0)) return kInf;
    const double s = two_params ? t(1) : 1.0;
    if (two_params && !(s > 0.0)) return kInf;
    const auto p = probs_for(t(0), s);
    if (!p) return kInf;
    return negative_log_likelihood(data, *p);
  };
  result.covariance =
      covariance_from_hessian(numeric_hessian(nll_theta, theta), result.flags);
  std::vector<std::string> names{"n_bar"};
  if (two_params) names.push_back("s");
  result.params = params_with_errors(names, theta, result.covariance);

  const auto p_fit = probs_for(n_bar_hat, s_hat);
  if (p_fit) {
    result.gof =
        pearson_gof(data, *p_fit, dim, !options.truncated_support);
  }
  return result;
}

ModelSelection model_selection(const CountHistogram& h,
                               const DetectorParams& params,
                               const SourceFitOptions& options) {
  ModelSelection sel;
  sel.thermal = fit_source(h, params, SourceFamily::thermal, options);
  sel.negbinom = fit_source(h, params, SourceFamily::negbinom, options);
  sel.poisson = fit_source(h, params, SourceFamily::poisson, options);

  const double s = sel.negbinom.value("s");
  const double se = sel.negbinom.std_error("s");
  const bool unbounded = !std::isfinite(se);
  sel.separates_single_mode = !unbounded && (s - 2.0 * se > 1.0);
  if (s > 10.0 || unbounded) {
    sel.label = "poissonian";
  } else if (sel.separates_single_mode) {
    sel.label = "multimode";
  } else {
    sel.label = "single-mode-compatible";
  }
  return sel;
}

Ratio heralded_efficiency(std::int64_t coincidences, std::int64_t singles) {
  if (singles < 1) {
    throw std::invalid_argument("heralded_efficiency: singles must be >= 1");
  }
  if (coincidences < 0 || coincidences > singles) {
    throw std::invalid_argument(
        "heralded_efficiency: coincidences outside [0, singles]");
  }
  const double p =
      static_cast<double>(coincidences) / static_cast<double>(singles);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(singles));
  return {p, se};
}

FitResult fit_stimulation(std::span<const StimPoint> points) {
  if (points.size() < 3) {
    throw std::invalid_argument("fit_stimulation: need at least 3 points");
  }
  double i_min = kInf, i_max = -kInf;
  for (const auto& pt : points) {
    if (!(pt.intensity >= 0.0)) {
      throw std::invalid_argument("fit_stimulation: intensity < 0");
    }
    i_min = std::min(i_min, pt.intensity);
    i_max = std::max(i_max, pt.intensity);
  }
  if (!(i_max > i_min)) {
    throw std::invalid_argument(
        "fit_stimulation: degenerate design, all intensities equal");
  }

  bool have_errors = true;
  for (const auto& pt : points) {
    if (!(pt.err > 0.0)) have_errors = false;
  }

  auto curve = [](double s, double alpha, double intensity) {
    const double sh = std::sinh(alpha * std::sqrt(intensity));
    return s * sh * sh;
  };
  auto chi2_of = [&](double s, double alpha) {
    double acc = 0.0;
    for (const auto& pt : points) {
      const double w = have_errors ? 1.0 / (pt.err * pt.err) : 1.0;
      const double d = pt.n_bar - curve(s, alpha, pt.intensity);
      acc += w * d * d;
    }
    return acc;
  };
  auto objective = [&](const Eigen::VectorXd& u) {
    const double s = std::exp(u(0));
    const double alpha = std::exp(u(1));
    if (!(s > 1e-6 && s < 1e6 && alpha > 1e-8 && alpha < 1e4)) return kInf;
    return chi2_of(s, alpha);
  };

  // Small-tau slope fixes the product s*alpha^2; seed alpha from it across
  // a grid of mode counts.
  double slope = 0.0;
  {
    double num = 0.0, den = 0.0;
    for (const auto& pt : points) {
      num += pt.intensity * pt.n_bar;
      den += pt.intensity * pt.intensity;
    }
    slope = den > 0.0 ? std::max(num / den, 1e-12) : 1e-6;
  }

  SimplexResult best;
  best.value = kInf;
  for (const double s0 : {0.5, 1.0, 2.0, 5.0, 12.0, 30.0, 80.0}) {
    const double alpha0 = std::sqrt(slope / s0);
    Eigen::VectorXd u0(2);
    u0 << std::log(s0), std::log(alpha0);
    Eigen::VectorXd step(2);
    step << 0.8, 0.4;
    SimplexOptions opt;
    opt.restarts = 2;
    const SimplexResult r = nelder_mead(objective, u0, step, opt);
    if (r.value < best.value) best = r;
  }

  FitResult result;
  result.converged = best.converged && std::isfinite(best.value);
  const double s_hat = std::exp(best.x(0));
  const double alpha_hat = std::exp(best.x(1));

  Eigen::VectorXd theta(2);
  theta << s_hat, alpha_hat;
  // Gaussian errors: -log L = chi2 / 2 + const.
  auto half_chi2 = [&](const Eigen::VectorXd& t) {
    if (!(t(0) > 0.0 && t(1) > 0.0)) return kInf;
    return 0.5 * chi2_of(t(0), t(1));
  };
  result.covariance =
      covariance_from_hessian(numeric_hessian(half_chi2, theta), result.flags);
  result.params = params_with_errors({"s", "alpha"}, theta, result.covariance);
  result.log_likelihood = -0.5 * best.value;

  const double var_s = result.covariance(0, 0);
  const double var_a = result.covariance(1, 1);
  const double cov_sa = result.covariance(0, 1);
  if (std::isfinite(var_s) && std::isfinite(var_a) && var_s > 0.0 &&
      var_a > 0.0) {
    const double corr = cov_sa / std::sqrt(var_s * var_a);
    if (std::abs(corr) > 0.995) {
      result.flags.push_back("linear_regime_degenerate");
    }
  } else {
    result.flags.push_back("linear_regime_degenerate");
  }
  // The product is what linear-regime data pins down.
  const double product = s_hat * alpha_hat * alpha_hat;
  double product_se = kInf;
  if (std::isfinite(var_s) && std::isfinite(var_a)) {
    const double a2 = alpha_hat * alpha_hat;
    const double d_s = a2;
    const double d_a = 2.0 * s_hat * alpha_hat;
    const double var =
        d_s * d_s * var_s + d_a * d_a * var_a + 2.0 * d_s * d_a * cov_sa;
    if (var >= 0.0) product_se = std::sqrt(var);
  }
  result.params.push_back({"s_alpha_sq", product, product_se});

  if (have_errors) {
    const int dof = static_cast<int>(points.size()) - 2;
    if (dof >= 1) {
      result.gof = GofStats{best.value, dof,
                            boost::math::gamma_q(0.5 * dof, 0.5 * best.value)};
    }
  }
  return result;
}

std::vector<FitParam> bootstrap_source_errors(const CountHistogram& h,
                                              const DetectorParams& params,
                                              SourceFamily family, int replicas,
                                              std::uint64_t seed,
                                              const SourceFitOptions& options) {
  require_events(h);
  if (replicas < 2) {
    throw std::invalid_argument("bootstrap: need at least 2 replicas");
  }
  const ProbVec empirical = h.normalized();
  const std::int64_t total = h.total();

  std::vector<std::vector<double>> values;
  std::vector<std::string> names;
  for (int r = 0; r < replicas; ++r) {
    const CountHistogram resampled =
        sample_counts(empirical, total, seed + static_cast<std::uint64_t>(r));
    const FitResult fit = fit_source(resampled, params, family, options);
    if (names.empty()) {
      for (const auto& p : fit.params) names.push_back(p.name);
      values.resize(names.size());
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      values[i].push_back(fit.params[i].value);
    }
  }

  std::vector<FitParam> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    double mean = 0.0;
    for (double v : values[i]) mean += v;
    mean /= static_cast<double>(values[i].size());
    double var = 0.0;
    for (double v : values[i]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values[i].size() - 1);
    out.push_back({names[i], mean, std::sqrt(var)});
  }
  return out;
}

}  // namespace sipmstat
