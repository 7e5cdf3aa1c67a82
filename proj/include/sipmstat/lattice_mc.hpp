#pragma once
// Monte Carlo crosstalk cascades on a finite 2D APD grid. This is the
// independent numerical check for the analytical cascade matrix: it knows
// about the detector geometry (edges have fewer neighbors, elements fire at
// most once) that the analytical recursion deliberately ignores.

#include <cstdint>

#include "sipmstat/histogram.hpp"

namespace sipmstat {

/// Where cascade seeds may land. The conversion between the per-neighbor
/// and the overall crosstalk probability assumes a full 4-neighborhood, so
/// validation runs against the analytical matrix seed the interior;
/// uniform placement over the whole grid (the default) keeps the boundary
/// deficit that real uniform illumination would have.
enum class SeedPlacement { uniform_all, interior };

struct LatticeConfig {
  int rows = 10;
  int cols = 10;
  double epsilon_nn = 0.0;  ///< per-neighbor crosstalk probability, in [0,1)
  std::uint64_t rng_seed = 0;
  std::int64_t trials = 1;
  SeedPlacement placement = SeedPlacement::uniform_all;

  int elements() const { return rows * cols; }
  void validate() const;
};

struct McResult {
  CountHistogram counts;  ///< final fired-element totals per trial
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
};

/// Staged cascade from initial_fired seeds placed uniformly on distinct
/// elements. Each newly fired element attempts each of its <= 4 lattice
/// neighbors once, independently, with probability epsilon_nn; attempts on
/// already-fired elements do nothing. Stops when a stage fires nothing.
/// Results are identical for any thread count given the same seed.
McResult simulate_cascade(const LatticeConfig& config, int initial_fired,
                          int threads = 1);

/// Full detection chain per trial: thin photons by eta, scatter survivors
/// uniformly over the elements (collisions merge), add Poisson(lambda_dk)
/// dark seeds, then run the cascade and record the total fired.
McResult simulate_detection(const LatticeConfig& config, int photons,
                            double eta, double lambda_dk, int threads = 1);

}  // namespace sipmstat
