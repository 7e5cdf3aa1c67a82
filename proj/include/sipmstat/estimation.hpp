#pragma once
// Parameter estimation against measured count histograms. Counts are
// multinomial, so fits maximize the multinomial likelihood; the Pearson
// chi-square against the fitted model is reported as the goodness of fit.
// Uncertainties come from the inverse observed information (numerical
// Hessian of the log-likelihood); bootstrap resampling is available as an
// empirical cross-check.

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sipmstat/detector_response.hpp"
#include "sipmstat/distributions.hpp"
#include "sipmstat/histogram.hpp"

namespace sipmstat {

struct GofStats {
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

struct FitParam {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
};

struct FitResult {
  std::vector<FitParam> params;
  Eigen::MatrixXd covariance;  ///< over free parameters, in params order
  double log_likelihood = 0.0;
  std::optional<GofStats> gof;
  bool converged = false;
  std::vector<std::string> flags;

  double value(const std::string& name) const;
  double std_error(const std::string& name) const;
  bool has_flag(const std::string& flag) const;
};

enum class SourceFamily { thermal, negbinom, poisson };

std::string to_string(SourceFamily family);
SourceFamily source_family_from_string(const std::string& name);

/// Block-truncated measured-space model: probabilities of counts 0..k_max
/// for a source pmf pushed through crosstalk * dark * loss. Equivalent to
/// apply(compose_response(params), src) on the retained range, but the
/// detector blocks are prebuilt so repeated source evaluations are cheap.
class MeasuredModel {
 public:
  MeasuredModel(const DetectorParams& params, int k_max, int src_n_max);

  Eigen::VectorXd operator()(const ProbVec& src) const;
  int k_max() const { return static_cast<int>(block_.rows()) - 1; }
  int src_n_max() const { return static_cast<int>(block_.cols()) - 1; }

 private:
  Eigen::MatrixXd block_;  // (k_max+1) x (src_n_max+1)
};

/// Measured-space pmf of a source family pushed through the detector chain.
/// With k_max < 0 the truncation grows until the retained mass is within
/// tol of 1.
ProbVec measured_distribution(const DetectorParams& params,
                              SourceFamily family, const ModeModel& source,
                              int k_max = -1, double tol = kTruncTol);

/// Dark-run calibration: maximizes the likelihood of
/// crosstalk(epsilon) * dark(lambda) acting on the vacuum.
/// Free parameters: lambda_dk, epsilon.
FitResult fit_dark_calibration(const CountHistogram& h, int n_max = -1);

struct SourceFitOptions {
  int n_max = -1;  ///< measured-space truncation; -1 picks it from the data
  /// Normalize the model over the observed range instead of full support
  /// (for histograms whose upper bins were discarded).
  bool truncated_support = false;
};

/// Source fit with the detector parameters held fixed. thermal and poisson
/// free n_bar only; negbinom frees (n_bar, s).
FitResult fit_source(const CountHistogram& h, const DetectorParams& params,
                     SourceFamily family, const SourceFitOptions& options = {});

struct ModelSelection {
  FitResult thermal;
  FitResult negbinom;
  FitResult poisson;
  std::string label;  ///< "poissonian" for s > 10 or an unbounded s interval
  bool separates_single_mode = false;  ///< s - 2*stderr > 1 on the negbinom fit
};

ModelSelection model_selection(const CountHistogram& h,
                               const DetectorParams& params,
                               const SourceFitOptions& options = {});

struct Ratio {
  double value = 0.0;
  double std_error = 0.0;
};

/// Coincidence-to-singles ratio with its binomial standard error.
Ratio heralded_efficiency(std::int64_t coincidences, std::int64_t singles);

struct StimPoint {
  double intensity = 0.0;
  double n_bar = 0.0;
  double err = 0.0;
};

/// Weighted least squares of n_bar = s * sinh^2(alpha * sqrt(I)).
/// When the points cover only the linear regime the two parameters are
/// individually unidentifiable; the fit then flags the degeneracy and
/// reports the constrained product as parameter "s_alpha_sq".
FitResult fit_stimulation(std::span<const StimPoint> points);

/// Bootstrap standard errors (resampled histograms, refit) as an empirical
/// alternative to the information-matrix errors.
std::vector<FitParam> bootstrap_source_errors(const CountHistogram& h,
                                              const DetectorParams& params,
                                              SourceFamily family,
                                              int replicas = 200,
                                              std::uint64_t seed = 1,
                                              const SourceFitOptions& options = {});

}  // namespace sipmstat
