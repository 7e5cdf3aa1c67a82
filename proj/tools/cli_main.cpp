// Command-line front end: synthesize measured histograms, run the lattice
// Monte Carlo, calibrate detector parameters, fit source distributions,
// fit stimulation curves, and decompose pulse-height spectra. Every command
// is deterministic given its seed and writes nothing until its inputs have
// validated.
//
// Exit codes: 0 success, 2 validation error, 3 fit did not converge,
// 4 I/O error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "sipmstat/csv_io.hpp"
#include "sipmstat/estimation.hpp"
#include "sipmstat/lattice_mc.hpp"
#include "sipmstat/pulse_fit.hpp"

namespace {

using namespace sipmstat;

constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitIo = 4;

struct GridSize {
  int rows = 10;
  int cols = 10;
};

GridSize parse_grid(const std::string& text) {
  const auto sep = text.find_first_of("xX");
  if (sep == std::string::npos) {
    throw std::invalid_argument("--grid expects ROWSxCOLS, e.g. 10x10");
  }
  GridSize g;
  try {
    g.rows = std::stoi(text.substr(0, sep));
    g.cols = std::stoi(text.substr(sep + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("--grid expects ROWSxCOLS, e.g. 10x10");
  }
  return g;
}

// ---------------------------------------------------------------------------
// synth: sample a measured histogram from source + detector chain
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string family = "thermal";
  double n_bar = 1.0;
  double s = 1.0;
  DetectorParams params;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  int n_max = -1;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  if (a.trials < 1) throw std::invalid_argument("--trials must be >= 1");
  a.params.validate();
  const SourceFamily family = source_family_from_string(a.family);
  const ProbVec measured = measured_distribution(
      a.params, family, {a.n_bar, a.s}, a.n_max);
  CountHistogram h = sample_counts(measured, a.trials, a.seed);
  h.shrink();
  write_count_histogram_csv(a.out, h);
  std::cout << "wrote " << a.out << " (" << h.total() << " events, max n "
            << h.counts.size() - 1 << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate: dark-run fit of (lambda_dk, epsilon)
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string in;
  std::string out;
  int n_max = -1;
};

int run_calibrate(const CalibrateArgs& a) {
  const CountHistogram h = read_count_histogram_csv(a.in);
  const FitResult fit = fit_dark_calibration(h, a.n_max);

  DetectorParams params;
  params.eta = 1.0;
  params.lambda_dk = fit.value("lambda_dk");
  params.epsilon = fit.value("epsilon");
  params.eta_source = "unset (calibrate separately from heralded counts)";
  params.lambda_source = "dark-run fit of " + a.in;
  params.epsilon_source = "dark-run fit of " + a.in;

  write_text_file(a.out + ".fit.txt", fit_result_text(fit));
  write_text_file(a.out + ".fit.json", fit_result_json(fit));
  write_detector_params_json(a.out + ".params.json", params);
  std::cout << fit_result_text(fit);
  if (!fit.converged) {
    std::cerr << "calibration did not converge; outputs are labeled\n";
    return kExitNoConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// fit: source distribution fit / model selection
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string in;
  std::string params_path;
  DetectorParams params;
  bool params_from_flags = false;
  std::string family = "thermal";
  std::string out;
  int n_max = -1;
  bool truncated_support = false;
};

void write_fit_outputs(const std::string& prefix, const std::string& label,
                       const FitResult& fit, const DetectorParams& params,
                       SourceFamily family, int hist_len) {
  write_text_file(prefix + label + ".fit.txt", fit_result_text(fit));
  write_text_file(prefix + label + ".fit.json", fit_result_json(fit));

  const double n_bar = fit.value("n_bar");
  const double s =
      family == SourceFamily::negbinom ? fit.value("s") : 1.0;
  ModeModel source{n_bar, s};

  // reconstructed source distribution
  int src_n_max = 0;
  ProbVec src;
  switch (family) {
    case SourceFamily::thermal:
      src_n_max = adaptive_n_max_thermal(n_bar);
      src = thermal_pmf(n_bar, src_n_max);
      break;
    case SourceFamily::negbinom:
      src_n_max = adaptive_n_max_negative_binomial(source);
      src = negative_binomial_pmf(source, src_n_max);
      break;
    case SourceFamily::poisson:
      src_n_max = adaptive_n_max_poisson(n_bar);
      src = poisson_pmf(n_bar, src_n_max);
      break;
  }
  write_prob_vec_csv(prefix + label + ".source.csv", src);

  // fitted measured-space curve for overlay plots
  const ProbVec curve = measured_distribution(params, family, source,
                                              std::max(hist_len + 10, 20));
  write_prob_vec_csv(prefix + label + ".model.csv", curve);
}

int run_fit(const FitArgs& a) {
  DetectorParams params = a.params;
  if (!a.params_path.empty()) {
    params = read_detector_params_json(a.params_path);
  } else if (!a.params_from_flags) {
    throw std::invalid_argument("provide --params FILE or --eta/--lambda-dk/--epsilon");
  }
  params.validate();
  const CountHistogram h = read_count_histogram_csv(a.in);
  const int hist_len = static_cast<int>(h.counts.size());

  SourceFitOptions options;
  options.n_max = a.n_max;
  options.truncated_support = a.truncated_support;

  bool converged = true;
  if (a.family == "select") {
    const ModelSelection sel = model_selection(h, params, options);
    write_fit_outputs(a.out, ".thermal", sel.thermal, params,
                      SourceFamily::thermal, hist_len);
    write_fit_outputs(a.out, ".negbinom", sel.negbinom, params,
                      SourceFamily::negbinom, hist_len);
    write_fit_outputs(a.out, ".poisson", sel.poisson, params,
                      SourceFamily::poisson, hist_len);
    std::ostringstream summary;
    summary << "label=" << sel.label << '\n'
            << "separates_single_mode="
            << (sel.separates_single_mode ? "true" : "false") << '\n'
            << "s=" << format_double(sel.negbinom.value("s")) << '\n'
            << "s.stderr=" << format_double(sel.negbinom.std_error("s"))
            << '\n';
    write_text_file(a.out + ".selection.txt", summary.str());
    std::cout << summary.str();
    converged = sel.thermal.converged && sel.negbinom.converged &&
                sel.poisson.converged;
  } else {
    const SourceFamily family = source_family_from_string(a.family);
    const FitResult fit = fit_source(h, params, family, options);
    write_fit_outputs(a.out, "", fit, params, family, hist_len);
    std::cout << fit_result_text(fit);
    converged = fit.converged;
  }
  if (!converged) {
    std::cerr << "fit did not converge; outputs are labeled\n";
    return kExitNoConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// mc: lattice cascade / detection simulation
// ---------------------------------------------------------------------------

struct McArgs {
  std::string grid = "10x10";
  double epsilon_nn = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  int initial_fired = 1;
  int photons = -1;
  double eta = 1.0;
  double lambda_dk = 0.0;
  int threads = 1;
  bool interior_seeds = false;
  std::string out;
  std::string compare_path;
};

int run_mc(const McArgs& a) {
  const GridSize grid = parse_grid(a.grid);
  LatticeConfig cfg;
  cfg.rows = grid.rows;
  cfg.cols = grid.cols;
  cfg.epsilon_nn = a.epsilon_nn;
  cfg.rng_seed = a.seed;
  cfg.trials = a.trials;
  cfg.placement =
      a.interior_seeds ? SeedPlacement::interior : SeedPlacement::uniform_all;
  cfg.validate();

  McResult result;
  if (a.photons >= 0) {
    result = simulate_detection(cfg, a.photons, a.eta, a.lambda_dk, a.threads);
  } else {
    result = simulate_cascade(cfg, a.initial_fired, a.threads);
  }

  std::string comparison;
  double tv = 0.0;
  if (!a.compare_path.empty()) {
    if (a.photons >= 0) {
      throw std::invalid_argument(
          "--compare applies to cascade runs (use --initial-fired)");
    }
    const double eps = 1.0 - std::pow(1.0 - a.epsilon_nn, 4);
    const ResponseMatrix ct = crosstalk_matrix(eps, cfg.elements());
    std::ostringstream table;
    table << "n,mc_prob,analytic_prob\n";
    for (int n = 0; n <= cfg.elements(); ++n) {
      const double mc = static_cast<double>(result.counts.counts[n]) /
                        static_cast<double>(result.trials);
      const double an = ct(n, a.initial_fired);
      tv += std::abs(mc - an);
      table << n << ',' << format_double(mc) << ',' << format_double(an)
            << '\n';
    }
    tv *= 0.5;
    comparison = table.str();
  }

  CountHistogram h = result.counts;
  h.shrink();
  write_count_histogram_csv(a.out, h);
  if (!comparison.empty()) {
    write_text_file(a.compare_path, comparison);
    std::cout << "tv=" << format_double(tv) << '\n';
  }
  std::cout << "wrote " << a.out << " (" << result.trials << " trials)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// stim: stimulation-curve fit
// ---------------------------------------------------------------------------

struct StimArgs {
  std::string in;
  std::string out;
};

int run_stim(const StimArgs& a) {
  const std::vector<StimPoint> points = read_stim_points_csv(a.in);
  if (points.size() < 3) {
    throw std::invalid_argument("need at least 3 stimulation points");
  }
  const FitResult fit = fit_stimulation(points);
  write_text_file(a.out + ".fit.txt", fit_result_text(fit));
  write_text_file(a.out + ".fit.json", fit_result_json(fit));

  // fitted curve sampled densely over the measured range for plotting
  double i_max = 0.0;
  for (const auto& p : points) i_max = std::max(i_max, p.intensity);
  const double s = fit.value("s");
  const double alpha = fit.value("alpha");
  std::ostringstream curve;
  curve << "intensity,n_bar\n";
  for (int k = 0; k <= 200; ++k) {
    const double intensity = i_max * k / 200.0;
    const double sh = std::sinh(alpha * std::sqrt(intensity));
    curve << format_double(intensity) << ',' << format_double(s * sh * sh)
          << '\n';
  }
  write_text_file(a.out + ".curve.csv", curve.str());
  std::cout << fit_result_text(fit);
  if (!fit.converged) {
    std::cerr << "fit did not converge; outputs are labeled\n";
    return kExitNoConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// pulses: pulse-height spectrum -> photon counts
// ---------------------------------------------------------------------------

struct PulsesArgs {
  std::string in;
  std::string out;
  int max_peaks = 25;
  bool parametric_widths = false;
};

int run_pulses(const PulsesArgs& a) {
  const PulseHistogram h = read_pulse_histogram_csv(a.in);
  PeakModel model;
  try {
    model = fit_peaks(h, a.max_peaks,
                      a.parametric_widths ? WidthMode::parametric
                                          : WidthMode::free_monotone);
  } catch (const NoPeriodicityError& e) {
    throw std::invalid_argument(
        std::string(e.what()) +
        " (check the binning covers several evenly spaced peaks; rebinning "
        "or restricting the range may help)");
  }

  const CountHistogram counts = extract_counts(model);
  std::ostringstream peaks;
  peaks << "k,center,width,area,resolution_error\n";
  for (int k = 0; k < model.n_peaks; ++k) {
    peaks << k << ',' << format_double(model.center(k)) << ','
          << format_double(model.widths[k]) << ','
          << format_double(model.areas[k]) << ','
          << format_double(resolution_error(model, k)) << '\n';
  }

  write_count_histogram_csv(a.out + ".counts.csv", counts);
  write_text_file(a.out + ".peaks.csv", peaks.str());
  std::cout << "peaks=" << model.n_peaks
            << " offset=" << format_double(model.offset)
            << " spacing=" << format_double(model.spacing) << '\n';
  if (!model.converged) {
    std::cerr << "peak fit did not converge; outputs are labeled\n";
    return kExitNoConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// figures: regenerate every synthetic figure dataset from one seed
// ---------------------------------------------------------------------------

struct FiguresArgs {
  std::string out_dir = "figures";
  std::uint64_t seed = 1;
  std::int64_t trials = 1000000;
};

int run_figures(const FiguresArgs& a) {
  if (a.trials < 1) throw std::invalid_argument("--trials must be >= 1");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw IoError("cannot create directory " + a.out_dir);
  const std::string d = a.out_dir + "/";

  // Pulse-height spectrum of a coherent-like source, resolving 21 peaks.
  {
    const int peaks = 21;
    const ProbVec areas_pmf = poisson_pmf(6.0, peaks - 1);
    PeakModel model;
    model.n_peaks = peaks;
    model.offset = 50.0;
    model.spacing = 20.0;
    for (int k = 0; k < peaks; ++k) {
      model.widths.push_back(2.2 * std::sqrt(0.5 + k));
      model.areas.push_back(2e6 * areas_pmf[k]);
    }
    const PulseHistogram pulse =
        synthesize_pulse_histogram(model, 1200, 0.0, 520.0);
    write_pulse_histogram_csv(d + "fig2_pulses.csv", pulse);
  }

  // One thermal state measured under three bias settings.
  {
    const double n_bar = 8.8;
    const DetectorParams sets[3] = {
        {6.0e-3, 2.4e-3, 0.280}, {4.9e-3, 1.0e-3, 0.140},
        {4.2e-3, 2.5e-4, 0.040}};
    const char* names[3] = {"fig3_high_bias", "fig3_mid_bias",
                            "fig3_low_bias"};
    for (int i = 0; i < 3; ++i) {
      const ProbVec p = measured_distribution(sets[i], SourceFamily::thermal,
                                              {n_bar, 1.0});
      CountHistogram h =
          sample_counts(p, a.trials, a.seed + static_cast<std::uint64_t>(i));
      h.shrink();
      write_count_histogram_csv(d + names[i] + ".csv", h);
      write_detector_params_json(d + names[i] + ".params.json", sets[i]);
    }
  }

  // Mode-count sweep: single-mode through many-mode sources.
  {
    struct Setting {
      const char* name;
      DetectorParams params;
      SourceFamily family;
      double n_bar, s;
    };
    const Setting sets[4] = {
        {"fig4_single_mode", {0.013, 1.95e-3, 0.26}, SourceFamily::thermal, 18.0, 1.0},
        {"fig4_low_modes", {0.019, 2.1e-3, 0.23}, SourceFamily::negbinom, 15.0, 1.4},
        {"fig4_mid_modes", {0.013, 1.69e-3, 0.27}, SourceFamily::negbinom, 15.0, 5.5},
        {"fig4_many_modes", {0.020, 3.0e-3, 0.22}, SourceFamily::poisson, 12.0, 1.0}};
    int i = 0;
    for (const auto& s : sets) {
      const ProbVec p =
          measured_distribution(s.params, s.family, {s.n_bar, s.s});
      CountHistogram h = sample_counts(
          p, a.trials, a.seed + 100 + static_cast<std::uint64_t>(i++));
      h.shrink();
      write_count_histogram_csv(d + s.name + ".csv", h);
      write_detector_params_json(d + std::string(s.name) + ".params.json",
                                 s.params);
    }
  }

  // Stimulation curves with 5% multiplicative noise.
  {
    struct Curve {
      const char* name;
      double s, alpha;
    };
    const Curve curves[4] = {{"fig5_a", 1.1, 0.08},
                             {"fig5_b", 1.4, 0.10},
                             {"fig5_c", 6.3, 0.08},
                             {"fig5_d", 23.0, 0.06}};
    int i = 0;
    for (const auto& c : curves) {
      Rng rng(a.seed + 200, static_cast<std::uint64_t>(i++));
      std::vector<StimPoint> points;
      for (const double intensity :
           {1.0, 5.0, 10.0, 20.0, 40.0, 70.0, 100.0, 150.0, 200.0, 260.0}) {
        const double sh = std::sinh(c.alpha * std::sqrt(intensity));
        const double clean = c.s * sh * sh;
        const double u1 = rng.next_double();
        const double u2 = rng.next_double();
        const double gauss = std::sqrt(-2.0 * std::log(u1 + 1e-300)) *
                             std::cos(6.283185307179586 * u2);
        points.push_back(
            {intensity, clean * (1.0 + 0.05 * gauss), 0.05 * clean});
      }
      write_stim_points_csv(d + c.name + ".csv", points);
    }
  }

  std::cout << "wrote figure datasets under " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SiPM photon-number statistics toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd =
      app.add_subcommand("synth", "sample a measured count histogram");
  synth_cmd->add_option("--family", synth.family,
                        "thermal | negbinom | poisson");
  synth_cmd->add_option("--n-bar", synth.n_bar, "mean photon number");
  synth_cmd->add_option("--s", synth.s, "mode count (negbinom)");
  synth_cmd->add_option("--eta", synth.params.eta, "detection efficiency");
  synth_cmd->add_option("--lambda-dk", synth.params.lambda_dk,
                        "mean dark counts per gate");
  synth_cmd->add_option("--epsilon", synth.params.epsilon,
                        "overall crosstalk probability");
  synth_cmd->add_option("--trials", synth.trials, "number of gates")
      ->required();
  synth_cmd->add_option("--seed", synth.seed, "RNG seed")->required();
  synth_cmd->add_option("--n-max", synth.n_max, "measured-space truncation");
  synth_cmd->add_option("--out", synth.out, "output histogram CSV")
      ->required();

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "fit (lambda_dk, epsilon) to a dark-run histogram");
  cal_cmd->add_option("--in", cal.in, "dark-run histogram CSV")->required();
  cal_cmd->add_option("--out", cal.out, "output prefix")->required();
  cal_cmd->add_option("--n-max", cal.n_max, "model truncation");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand(
      "fit", "reconstruct the source distribution from a histogram");
  fit_cmd->add_option("--in", fit.in, "measured histogram CSV")->required();
  fit_cmd->add_option("--params", fit.params_path,
                      "detector params JSON (from calibrate)");
  auto* eta_opt = fit_cmd->add_option("--eta", fit.params.eta,
                                      "detection efficiency");
  fit_cmd->add_option("--lambda-dk", fit.params.lambda_dk,
                      "mean dark counts per gate");
  fit_cmd->add_option("--epsilon", fit.params.epsilon,
                      "overall crosstalk probability");
  fit_cmd->add_option("--family", fit.family,
                      "thermal | negbinom | poisson | select");
  fit_cmd->add_option("--n-max", fit.n_max, "source truncation override");
  fit_cmd->add_flag("--truncated-support", fit.truncated_support,
                    "normalize the model over the observed range");
  fit_cmd->add_option("--out", fit.out, "output prefix")->required();

  McArgs mc;
  auto* mc_cmd =
      app.add_subcommand("mc", "lattice Monte Carlo crosstalk cascades");
  mc_cmd->add_option("--grid", mc.grid, "lattice size ROWSxCOLS");
  mc_cmd->add_option("--epsilon-nn", mc.epsilon_nn,
                     "per-neighbor crosstalk probability");
  mc_cmd->add_option("--trials", mc.trials, "number of trials")->required();
  mc_cmd->add_option("--seed", mc.seed, "RNG seed")->required();
  mc_cmd->add_option("--initial-fired", mc.initial_fired,
                     "cascade seeds per trial");
  mc_cmd->add_option("--photons", mc.photons,
                     "full detection run with this photon number");
  mc_cmd->add_option("--eta", mc.eta, "detection efficiency (with --photons)");
  mc_cmd->add_option("--lambda-dk", mc.lambda_dk,
                     "dark counts (with --photons)");
  mc_cmd->add_option("--threads", mc.threads, "worker threads");
  mc_cmd->add_flag("--interior-seeds", mc.interior_seeds,
                   "seed only elements with a full 4-neighborhood");
  mc_cmd->add_option("--out", mc.out, "output histogram CSV")->required();
  mc_cmd->add_option("--compare", mc.compare_path,
                     "also write an analytic-model comparison table");

  StimArgs stim;
  auto* stim_cmd =
      app.add_subcommand("stim", "fit the stimulation curve s*sinh^2(a*sqrt(I))");
  stim_cmd->add_option("--in", stim.in, "intensity,n_bar,err CSV")->required();
  stim_cmd->add_option("--out", stim.out, "output prefix")->required();

  PulsesArgs pulses;
  auto* pulses_cmd = app.add_subcommand(
      "pulses", "decompose a pulse-height spectrum into photon counts");
  pulses_cmd->add_option("--in", pulses.in, "bin_left,count CSV")->required();
  pulses_cmd->add_option("--max-peaks", pulses.max_peaks, "peak budget");
  pulses_cmd->add_flag("--parametric-widths", pulses.parametric_widths,
                       "use the two-parameter width law");
  pulses_cmd->add_option("--out", pulses.out, "output prefix")->required();

  FiguresArgs figures;
  auto* figures_cmd = app.add_subcommand(
      "figures", "regenerate all synthetic figure datasets");
  figures_cmd->add_option("--out", figures.out_dir, "output directory");
  figures_cmd->add_option("--seed", figures.seed, "RNG seed");
  figures_cmd->add_option("--trials", figures.trials,
                          "events per histogram");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  fit.params_from_flags = eta_opt->count() > 0;

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*cal_cmd) return run_calibrate(cal);
    if (*fit_cmd) return run_fit(fit);
    if (*mc_cmd) return run_mc(mc);
    if (*stim_cmd) return run_stim(stim);
    if (*pulses_cmd) return run_pulses(pulses);
    if (*figures_cmd) return run_figures(figures);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
