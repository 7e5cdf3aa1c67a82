#include "sipmstat/pulse_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sipmstat/simplex.hpp"

namespace sipmstat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Mass of a unit Gaussian at center c, width s inside [lo, hi].
double gauss_bin_mass(double c, double s, double lo, double hi) {
  return normal_cdf((hi - c) / s) - normal_cdf((lo - c) / s);
}

struct Design {
  Eigen::MatrixXd columns;  // bins x peaks, unit-area peak shapes
  Eigen::VectorXd counts;
};

Design build_design(const PulseHistogram& h, double offset, double spacing,
                    const std::vector<double>& widths) {
  const int bins = static_cast<int>(h.bin_counts.size());
  const int peaks = static_cast<int>(widths.size());
  Design d;
  d.columns = Eigen::MatrixXd::Zero(bins, peaks);
  d.counts = Eigen::VectorXd(bins);
  for (int b = 0; b < bins; ++b) {
    d.counts(b) = static_cast<double>(h.bin_counts[b]);
  }
  for (int k = 0; k < peaks; ++k) {
    const double c = offset + k * spacing;
    for (int b = 0; b < bins; ++b) {
      d.columns(b, k) =
          gauss_bin_mass(c, widths[k], h.bin_edges[b], h.bin_edges[b + 1]);
    }
  }
  return d;
}

/// Non-negative least squares by iterated active-set pruning: solve, drop
/// negative columns, repeat.
Eigen::VectorXd solve_areas(const Design& d) {
  const int peaks = static_cast<int>(d.columns.cols());
  std::vector<int> active(peaks);
  std::iota(active.begin(), active.end(), 0);
  Eigen::VectorXd areas = Eigen::VectorXd::Zero(peaks);
  for (int pass = 0; pass < peaks && !active.empty(); ++pass) {
    Eigen::MatrixXd sub(d.columns.rows(), active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      sub.col(static_cast<int>(i)) = d.columns.col(active[i]);
    }
    const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(d.counts);
    bool all_nonneg = true;
    std::vector<int> keep;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (sol(static_cast<int>(i)) >= 0.0) {
        keep.push_back(active[i]);
      } else {
        all_nonneg = false;
      }
    }
    if (all_nonneg) {
      for (std::size_t i = 0; i < active.size(); ++i) {
        areas(active[i]) = sol(static_cast<int>(i));
      }
      return areas;
    }
    areas.setZero();
    active = std::move(keep);
  }
  return areas;
}

double residual_sq(const Design& d, const Eigen::VectorXd& areas) {
  return (d.columns * areas - d.counts).squaredNorm();
}

/// Multiplicative penalty for width sequences that decrease with n.
double monotone_penalty(const std::vector<double>& widths, double spacing) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const double drop = (widths[k] - widths[k + 1]) / spacing;
    if (drop > 0.0) acc += drop * drop;
  }
  return 1.0 + 0.05 * acc;
}

std::vector<int> local_maxima(const std::vector<double>& v, double floor) {
  std::vector<int> maxima;
  const int n = static_cast<int>(v.size());
  for (int i = 1; i + 1 < n; ++i) {
    if (v[i] >= floor && v[i] > v[i - 1] && v[i] >= v[i + 1]) {
      maxima.push_back(i);
    }
  }
  return maxima;
}

/// Lag of the first significant autocorrelation maximum, refined by a
/// parabolic step; 0 when the counts carry no periodic structure.
double autocorrelation_lag(const std::vector<double>& counts) {
  const int n = static_cast<int>(counts.size());
  double mean = 0.0;
  for (double c : counts) mean += c;
  mean /= n;
  std::vector<double> ac(n / 2, 0.0);
  for (int lag = 0; lag < n / 2; ++lag) {
    double acc = 0.0;
    for (int i = 0; i + lag < n; ++i) {
      acc += (counts[i] - mean) * (counts[i + lag] - mean);
    }
    ac[lag] = acc;
  }
  if (ac.empty() || ac[0] <= 0.0) return 0.0;

  int best = 0;
  for (int lag = 2; lag + 1 < static_cast<int>(ac.size()); ++lag) {
    if (ac[lag] > ac[lag - 1] && ac[lag] >= ac[lag + 1] &&
        ac[lag] > 0.15 * ac[0]) {
      best = lag;
      break;
    }
  }
  if (best == 0) return 0.0;
  // parabolic refinement around the discrete maximum
  const double y0 = ac[best - 1], y1 = ac[best], y2 = ac[best + 1];
  const double denom = y0 - 2.0 * y1 + y2;
  const double shift = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
  return best + std::clamp(shift, -0.5, 0.5);
}

PeakModel fit_single_peak(const PulseHistogram& h) {
  const int bins = static_cast<int>(h.bin_counts.size());
  double total = 0.0, mean = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double x = 0.5 * (h.bin_edges[b] + h.bin_edges[b + 1]);
    const double c = static_cast<double>(h.bin_counts[b]);
    total += c;
    mean += c * x;
  }
  mean /= total;
  double var = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double x = 0.5 * (h.bin_edges[b] + h.bin_edges[b + 1]);
    const double c = static_cast<double>(h.bin_counts[b]);
    var += c * (x - mean) * (x - mean);
  }
  var /= total;

  PeakModel model;
  model.n_peaks = 1;
  model.offset = mean;
  model.spacing = h.bin_edges.back() - h.bin_edges.front();
  model.widths = {std::max(std::sqrt(var), 1e-12)};
  model.areas = {total};
  return model;
}

}  // namespace

void PulseHistogram::validate() const {
  if (bin_edges.size() < 2 || bin_counts.size() + 1 != bin_edges.size()) {
    throw std::invalid_argument("pulse histogram: edge/count size mismatch");
  }
  for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i) {
    if (!(bin_edges[i] < bin_edges[i + 1])) {
      throw std::invalid_argument("pulse histogram: edges not increasing");
    }
  }
  for (auto c : bin_counts) {
    if (c < 0) throw std::invalid_argument("pulse histogram: negative count");
  }
}

std::int64_t PulseHistogram::total() const {
  std::int64_t t = 0;
  for (auto c : bin_counts) t += c;
  return t;
}

double PeakModel::total_area() const {
  double t = 0.0;
  for (double a : areas) t += a;
  return t;
}

PeakModel fit_peaks(const PulseHistogram& h, int max_peaks, WidthMode mode) {
  h.validate();
  if (max_peaks < 1) throw std::invalid_argument("fit_peaks: max_peaks < 1");
  if (h.total() < 1) throw std::invalid_argument("fit_peaks: empty histogram");

  const int bins = static_cast<int>(h.bin_counts.size());
  const double bin_width = (h.bin_edges.back() - h.bin_edges.front()) / bins;
  std::vector<double> counts(bins);
  for (int b = 0; b < bins; ++b) {
    counts[b] = static_cast<double>(h.bin_counts[b]);
  }

  // Quantization wiggle in the tails also forms local maxima; only counts
  // carrying a real fraction of the tallest bin indicate structure.
  const double max_count = *std::max_element(counts.begin(), counts.end());
  const std::vector<int> prominent = local_maxima(counts, 0.02 * max_count);
  const double lag = autocorrelation_lag(counts);

  double spacing = 0.0;
  if (lag > 0.0) {
    spacing = lag * bin_width;
  } else if (prominent.size() >= 2) {
    std::vector<double> gaps;
    for (std::size_t i = 0; i + 1 < prominent.size(); ++i) {
      gaps.push_back((prominent[i + 1] - prominent[i]) * bin_width);
    }
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    spacing = gaps[gaps.size() / 2];
  } else if (prominent.size() == 1) {
    return fit_single_peak(h);
  } else {
    throw NoPeriodicityError("no periodic peak structure detected");
  }
  if (!(spacing > 0.0) || prominent.empty()) {
    throw NoPeriodicityError("no periodic peak structure detected");
  }

  // The first prominent maximum anchors the lattice, then the lattice is
  // extended left while real mass sits below it (bright sources can have a
  // 0-photon peak far smaller than the modal one).
  double first_max_x = h.bin_edges[prominent.front()] + 0.5 * bin_width;
  const double mass_floor = 1e-4 * static_cast<double>(h.total());
  while (first_max_x - spacing >
         h.bin_edges.front() + 0.25 * spacing) {
    // probe only the core of the hypothetical peak one spacing down, so a
    // genuine left tail does not trigger the extension
    const double lo_x = first_max_x - 1.25 * spacing;
    const double hi_x = first_max_x - 0.75 * spacing;
    double mass = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double x = h.bin_edges[b] + 0.5 * bin_width;
      if (x >= lo_x && x < hi_x) mass += counts[b];
    }
    if (mass <= mass_floor) break;
    first_max_x -= spacing;
  }
  const int n_peaks = std::min(
      max_peaks,
      1 + static_cast<int>(std::floor(
              (h.bin_edges.back() - first_max_x) / spacing + 0.25)));

  // Parametric stage: widths sigma(k) = sqrt(s0^2 + k s1^2); areas are
  // linear given the shape and come from the inner solve.
  auto widths_of = [n_peaks](double s0, double s1) {
    std::vector<double> w(n_peaks);
    for (int k = 0; k < n_peaks; ++k) {
      w[k] = std::sqrt(s0 * s0 + k * s1 * s1);
    }
    return w;
  };
  auto parametric_objective = [&](const Eigen::VectorXd& u) {
    const double offset = u(0);
    const double sp = u(1);
    const double s0 = std::exp(u(2));
    const double s1 = std::exp(u(3));
    if (!(sp > 2.0 * bin_width) || !(s0 > 1e-3 * bin_width) ||
        std::abs(offset - first_max_x) > 0.6 * spacing) {
      return kInf;
    }
    const Design d = build_design(h, offset, sp, widths_of(s0, s1));
    return residual_sq(d, solve_areas(d));
  };

  Eigen::VectorXd u0(4);
  u0 << first_max_x, spacing, std::log(spacing / 6.0), std::log(spacing / 20.0);
  Eigen::VectorXd step(4);
  step << 0.1 * spacing, 0.02 * spacing, 0.5, 0.7;
  SimplexOptions opt;
  opt.max_iterations = 2500;
  const SimplexResult fit0 = nelder_mead(parametric_objective, u0, step, opt);

  PeakModel model;
  model.converged = fit0.converged && std::isfinite(fit0.value);
  model.n_peaks = n_peaks;
  model.offset = fit0.x(0);
  model.spacing = fit0.x(1);
  model.widths = widths_of(std::exp(fit0.x(2)), std::exp(fit0.x(3)));

  if (mode == WidthMode::free_monotone) {
    // Per-peak refinement: coordinate sweeps with a soft monotonicity
    // penalty keeping sparse tail peaks from collapsing.
    auto objective_widths = [&](const std::vector<double>& w) {
      const Design d = build_design(h, model.offset, model.spacing, w);
      return residual_sq(d, solve_areas(d)) *
             monotone_penalty(w, model.spacing);
    };
    double current = objective_widths(model.widths);
    for (int sweep = 0; sweep < 3; ++sweep) {
      for (int k = 0; k < n_peaks; ++k) {
        const double w0 = model.widths[k];
        double lo = 0.4 * w0, hi = 2.5 * w0;
        // golden-section on the k-th width
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = hi;
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        auto eval_at = [&](double w) {
          std::vector<double> trial = model.widths;
          trial[k] = w;
          return objective_widths(trial);
        };
        double f1 = eval_at(x1), f2 = eval_at(x2);
        for (int it = 0; it < 24; ++it) {
          if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval_at(x1);
          } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval_at(x2);
          }
        }
        const double w_best = f1 < f2 ? x1 : x2;
        const double f_best = std::min(f1, f2);
        if (f_best < current) {
          model.widths[k] = w_best;
          current = f_best;
        }
      }
    }
  }

  const Design d = build_design(h, model.offset, model.spacing, model.widths);
  const Eigen::VectorXd areas = solve_areas(d);
  model.areas.assign(areas.data(), areas.data() + areas.size());
  return model;
}

CountHistogram extract_counts(const PeakModel& model) {
  if (model.n_peaks < 1 ||
      model.areas.size() != static_cast<std::size_t>(model.n_peaks)) {
    throw std::invalid_argument("extract_counts: malformed peak model");
  }
  const double total_area = model.total_area();
  const std::int64_t target = std::llround(total_area);

  std::vector<std::int64_t> counts(model.n_peaks);
  std::vector<std::pair<double, int>> remainders;
  std::int64_t assigned = 0;
  for (int k = 0; k < model.n_peaks; ++k) {
    const double a = std::max(model.areas[k], 0.0);
    counts[k] = static_cast<std::int64_t>(std::floor(a));
    assigned += counts[k];
    remainders.push_back({a - std::floor(a), k});
  }
  std::sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (std::int64_t i = 0; i < target - assigned &&
                           i < static_cast<std::int64_t>(remainders.size());
       ++i) {
    ++counts[remainders[static_cast<std::size_t>(i)].second];
  }

  CountHistogram h(std::move(counts));
  h.shrink();
  return h;
}

double resolution_error(const PeakModel& model, int n) {
  if (n < 0 || n >= model.n_peaks) {
    throw std::invalid_argument("resolution_error: peak index out of range");
  }
  if (model.widths.size() != static_cast<std::size_t>(model.n_peaks) ||
      model.areas.size() != static_cast<std::size_t>(model.n_peaks)) {
    throw std::invalid_argument("resolution_error: malformed peak model");
  }
  const double a_n = model.areas[n];
  auto boundary_term = [&](int neighbor) {
    const double half_gap =
        0.5 * std::abs(model.center(neighbor) - model.center(n));
    const double out = normal_cdf(-half_gap / model.widths[n]);
    double ratio = 1.0;
    if (a_n > 0.0) {
      ratio = model.areas[neighbor] / a_n;
    } else if (model.areas[neighbor] == 0.0) {
      ratio = 0.0;
    } else {
      return 1.0;  // empty peak next to a populated one: unresolvable
    }
    const double in = ratio * normal_cdf(-half_gap / model.widths[neighbor]);
    return 0.5 * (out + in);
  };

  double err = 0.0;
  if (n > 0) err += boundary_term(n - 1);
  if (n + 1 < model.n_peaks) err += boundary_term(n + 1);
  return std::min(err, 1.0);
}

PulseHistogram synthesize_pulse_histogram(const PeakModel& model, int n_bins,
                                          double lo, double hi) {
  if (n_bins < 1 || !(hi > lo)) {
    throw std::invalid_argument("synthesize_pulse_histogram: bad grid");
  }
  PulseHistogram h;
  h.bin_edges.resize(n_bins + 1);
  const double width = (hi - lo) / n_bins;
  for (int b = 0; b <= n_bins; ++b) h.bin_edges[b] = lo + b * width;
  h.bin_counts.resize(n_bins, 0);
  for (int b = 0; b < n_bins; ++b) {
    double expected = 0.0;
    for (int k = 0; k < model.n_peaks; ++k) {
      expected += model.areas[k] * gauss_bin_mass(model.center(k),
                                                  model.widths[k],
                                                  h.bin_edges[b],
                                                  h.bin_edges[b + 1]);
    }
    h.bin_counts[b] = std::llround(expected);
  }
  return h;
}

}  // namespace sipmstat
