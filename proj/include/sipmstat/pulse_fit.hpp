#pragma once
// Pulse-intensity histograms and their decomposition into equally spaced
// Gaussian peaks, one per fired-element count. Peak areas give the photon
// count histogram; peak overlap gives the number-resolution error.

#include <stdexcept>
#include <vector>

#include "sipmstat/histogram.hpp"

namespace sipmstat {

struct PulseHistogram {
  std::vector<double> bin_edges;        ///< strictly increasing, size B+1
  std::vector<std::int64_t> bin_counts; ///< size B

  void validate() const;
  std::int64_t total() const;
};

struct PeakModel {
  int n_peaks = 0;
  double offset = 0.0;   ///< center of the 0-photon peak
  double spacing = 0.0;  ///< gain per fired element, > 0
  std::vector<double> widths;  ///< per-peak sigma
  std::vector<double> areas;   ///< per-peak event counts
  bool converged = true;

  double center(int k) const { return offset + k * spacing; }
  double total_area() const;
};

struct NoPeriodicityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class WidthMode {
  free_monotone,  ///< per-peak widths, softly penalized when non-monotone
  parametric      ///< sigma(k) = sqrt(sigma0^2 + k * sigma1^2)
};

/// Least-squares fit of a sum of equally spaced Gaussians. Spacing is
/// seeded from the autocorrelation of the counts and the 0-photon peak from
/// the first prominent maximum. Throws NoPeriodicityError when the
/// histogram shows no usable structure; a lone peak is fit as n_peaks = 1.
PeakModel fit_peaks(const PulseHistogram& h, int max_peaks,
                    WidthMode mode = WidthMode::free_monotone);

/// Peak areas rounded to integer counts; the total is preserved by
/// largest-remainder apportionment and trailing zero peaks are dropped.
CountHistogram extract_counts(const PeakModel& model);

/// Misclassification probability for peak n under midpoint decision
/// boundaries: the average of the peak's own mass crossing each boundary
/// and the neighbor mass leaking across it, weighted by the area ratio.
double resolution_error(const PeakModel& model, int n);

/// Expected bin contents of the model on a uniform grid, rounded.
PulseHistogram synthesize_pulse_histogram(const PeakModel& model, int n_bins,
                                          double lo, double hi);

}  // namespace sipmstat
