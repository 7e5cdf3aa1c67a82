#include "sipmstat/lattice_mc.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>
#include <vector>

namespace sipmstat {

void LatticeConfig::validate() const {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("lattice: rows and cols must be >= 1");
  }
  if (!(epsilon_nn >= 0.0 && epsilon_nn < 1.0)) {
    throw std::invalid_argument("lattice: epsilon_nn outside [0,1)");
  }
  if (trials < 1) throw std::invalid_argument("lattice: trials must be >= 1");
}

namespace {

// Per-thread scratch. The fired map uses a trial stamp so it never needs
// clearing between trials.
struct Scratch {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> fired_stamp;
  std::vector<int> frontier, next_frontier;
  std::vector<int> perm;   // identity between trials
  std::vector<int> swaps;  // Fisher-Yates undo log

  explicit Scratch(const LatticeConfig& cfg) : rows(cfg.rows), cols(cfg.cols) {
    const int elements = cfg.elements();
    fired_stamp.assign(elements, -1);
    perm.resize(elements);
    for (int i = 0; i < elements; ++i) perm[i] = i;
    frontier.reserve(elements);
    next_frontier.reserve(elements);
  }

  bool fired(int cell, std::int64_t trial) const {
    return fired_stamp[cell] == trial;
  }
  // Returns false when the cell was already fired in this trial.
  bool fire(int cell, std::int64_t trial) {
    if (fired_stamp[cell] == trial) return false;
    fired_stamp[cell] = trial;
    return true;
  }
};

int run_cascade(Scratch& s, std::int64_t trial, double eps_nn, Rng& rng) {
  int total = static_cast<int>(s.frontier.size());
  if (eps_nn <= 0.0) return total;
  while (!s.frontier.empty()) {
    s.next_frontier.clear();
    for (int cell : s.frontier) {
      const int r = cell / s.cols;
      const int c = cell % s.cols;
      const int up = r > 0 ? cell - s.cols : -1;
      const int down = r + 1 < s.rows ? cell + s.cols : -1;
      const int left = c > 0 ? cell - 1 : -1;
      const int right = c + 1 < s.cols ? cell + 1 : -1;
      for (int nb : {up, down, left, right}) {
        if (nb < 0) continue;
        if (rng.bernoulli(eps_nn) && s.fire(nb, trial)) {
          s.next_frontier.push_back(nb);
          ++total;
        }
      }
    }
    std::swap(s.frontier, s.next_frontier);
  }
  return total;
}

template <typename TrialFn>
McResult run_trials(const LatticeConfig& config, TrialFn trial_fn,
                    int threads) {
  config.validate();
  const int elements = config.elements();
  threads = std::clamp(threads, 1, 256);
  const int workers =
      static_cast<int>(std::min<std::int64_t>(threads, config.trials));

  std::vector<CountHistogram> partial(
      workers, CountHistogram(std::vector<std::int64_t>(elements + 1, 0)));
  auto worker = [&](int w) {
    Scratch scratch(config);
    const std::int64_t lo = config.trials * w / workers;
    const std::int64_t hi = config.trials * (w + 1) / workers;
    for (std::int64_t t = lo; t < hi; ++t) {
      Rng rng(config.rng_seed, static_cast<std::uint64_t>(t));
      ++partial[w].counts[trial_fn(scratch, t, rng)];
    }
  };

  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  McResult result;
  result.counts = std::move(partial[0]);
  for (int w = 1; w < workers; ++w) result.counts.merge(partial[w]);
  result.trials = config.trials;
  result.seed = config.rng_seed;
  return result;
}

}  // namespace

McResult simulate_cascade(const LatticeConfig& config, int initial_fired,
                          int threads) {
  config.validate();
  const int elements = config.elements();
  if (initial_fired < 0 || initial_fired > elements) {
    throw std::invalid_argument("simulate_cascade: initial_fired exceeds element count");
  }

  // Candidate seed cells. Interior placement needs a 3x3 grid or larger and
  // room for all seeds; otherwise every element is eligible.
  std::vector<int> candidates;
  if (config.placement == SeedPlacement::interior && config.rows > 2 &&
      config.cols > 2 &&
      (config.rows - 2) * (config.cols - 2) >= initial_fired) {
    for (int r = 1; r + 1 < config.rows; ++r) {
      for (int c = 1; c + 1 < config.cols; ++c) {
        candidates.push_back(r * config.cols + c);
      }
    }
  } else {
    candidates.resize(elements);
    for (int i = 0; i < elements; ++i) candidates[i] = i;
  }

  return run_trials(
      config,
      [&config, initial_fired, &candidates](Scratch& s, std::int64_t trial,
                                            Rng& rng) {
        s.frontier.clear();
        s.swaps.clear();
        const int pool = static_cast<int>(candidates.size());
        // Partial Fisher-Yates over the candidate list: seeds land on
        // distinct elements. The swaps are undone afterwards so every trial
        // sees the same list and the outcome cannot depend on which trials
        // shared this scratch.
        for (int i = 0; i < initial_fired; ++i) {
          const int j = i + static_cast<int>(rng.uniform_int(pool - i));
          std::swap(s.perm[i], s.perm[j]);
          s.swaps.push_back(j);
          const int cell = candidates[s.perm[i]];
          s.fire(cell, trial);
          s.frontier.push_back(cell);
        }
        for (int i = initial_fired; i-- > 0;) {
          std::swap(s.perm[i], s.perm[s.swaps[i]]);
        }
        return run_cascade(s, trial, config.epsilon_nn, rng);
      },
      threads);
}

McResult simulate_detection(const LatticeConfig& config, int photons,
                            double eta, double lambda_dk, int threads) {
  config.validate();
  if (photons < 0) throw std::invalid_argument("simulate_detection: photons < 0");
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("simulate_detection: eta outside [0,1]");
  }
  if (!(lambda_dk >= 0.0)) {
    throw std::invalid_argument("simulate_detection: lambda_dk < 0");
  }
  return run_trials(
      config,
      [&config, photons, eta, lambda_dk](Scratch& s, std::int64_t trial,
                                         Rng& rng) {
        s.frontier.clear();
        const int elements = config.elements();
        for (int p = 0; p < photons; ++p) {
          if (!rng.bernoulli(eta)) continue;  // lost
          const int cell = static_cast<int>(rng.uniform_int(elements));
          if (s.fire(cell, trial)) s.frontier.push_back(cell);  // pile-up merges
        }
        const long dark = rng.poisson(lambda_dk);
        for (long d = 0; d < dark; ++d) {
          const int cell = static_cast<int>(rng.uniform_int(elements));
          if (s.fire(cell, trial)) s.frontier.push_back(cell);
        }
        return run_cascade(s, trial, config.epsilon_nn, rng);
      },
      threads);
}

}  // namespace sipmstat
