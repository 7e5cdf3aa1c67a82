#pragma once
// File formats used by the CLI and golden tests. Histograms and curves are
// plain CSV; detector parameters and fit summaries also have JSON forms.

#include <stdexcept>
#include <string>
#include <vector>

#include "sipmstat/detector_response.hpp"
#include "sipmstat/estimation.hpp"
#include "sipmstat/pulse_fit.hpp"

namespace sipmstat {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic shortest-ish double formatting (%.17g).
std::string format_double(double v);

// CSV "n,count"
CountHistogram read_count_histogram_csv(const std::string& path);
void write_count_histogram_csv(const std::string& path,
                               const CountHistogram& h);

// CSV "n,prob"
void write_prob_vec_csv(const std::string& path, const ProbVec& p);

// CSV "bin_left,count"; the last edge is inferred from the uniform width.
PulseHistogram read_pulse_histogram_csv(const std::string& path);
void write_pulse_histogram_csv(const std::string& path,
                               const PulseHistogram& h);

// CSV "intensity,n_bar,err"
std::vector<StimPoint> read_stim_points_csv(const std::string& path);
void write_stim_points_csv(const std::string& path,
                           const std::vector<StimPoint>& points);

// JSON {"eta": ..., "lambda_dk": ..., "epsilon": ..., "provenance": {...}}
DetectorParams read_detector_params_json(const std::string& path);
void write_detector_params_json(const std::string& path,
                                const DetectorParams& params);

/// key=value lines, diff-friendly.
std::string fit_result_text(const FitResult& fit);
/// Machine-readable summary of the same content.
std::string fit_result_json(const FitResult& fit);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace sipmstat
