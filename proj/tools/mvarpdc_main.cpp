// Command-line front end: simulate benchmark trial sets, fit autoregressive
// models, compute partial directed coherence, derive significance thresholds,
// and drive full reproducible experiment sweeps.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure,
// 4 file I/O or format error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvarpdc/mvarpdc.hpp"

namespace {

using namespace mvarpdc;

constexpr const char* kSirHelp =
    "Signal-to-interference ratio, defined as the RMS amplitude ratio of the "
    "clean signal to the scaled interference over all channels and samples "
    "of a trial ('inf' disables mixing)";

double parse_sir(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "INF")
    return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse SIR value '" + s + "'");
  }
}

struct EstimatorFlags {
  std::string method = "least-squares";
  int order = 2;
  EmConfig em;
  std::string lambda_init = "inverse-variance";
  std::string lambda_structure = "per-sample";

  void attach(CLI::App* cmd) {
    cmd->add_option("--method", method, "Estimator: least-squares | sparse-bayes")
        ->check(CLI::IsMember({"least-squares", "sparse-bayes"}));
    cmd->add_option("--order", order, "Autoregression order")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--em-max-iters", em.max_iters,
                    "EM iteration cap (sparse-bayes)");
    cmd->add_option("--em-rel-tol", em.rel_tol,
                    "EM relative-change stop tolerance (sparse-bayes)");
    cmd->add_option("--em-prune-threshold", em.prune_threshold,
                    "Precision above which a coefficient is pruned to zero");
    cmd->add_option("--em-nu-init", em.nu_init,
                    "Initial per-coefficient prior precision");
    cmd->add_option("--em-lambda-init", lambda_init,
                    "Noise precision init: inverse-variance | unit")
        ->check(CLI::IsMember({"inverse-variance", "unit"}));
    cmd->add_option("--em-lambda-structure", lambda_structure,
                    "Noise precision structure: per-sample | isotropic")
        ->check(CLI::IsMember({"per-sample", "isotropic"}));
  }

  EstimatorConfig build() const {
    EstimatorConfig est;
    est.method = method == "sparse-bayes" ? EstimationMethod::SparseBayes
                                          : EstimationMethod::LeastSquares;
    est.order = order;
    est.em = em;
    est.em.lambda_init = lambda_init == "unit" ? LambdaInit::Unit
                                               : LambdaInit::InverseVariance;
    est.em.lambda_structure = lambda_structure == "isotropic"
                                  ? LambdaStructure::Isotropic
                                  : LambdaStructure::PerSample;
    return est;
  }
};

struct ScenarioFlags {
  std::string scenario = "interacting";
  int trials = 40;
  int samples = 600;
  int burn_in = 500;
  std::vector<double> cutoffs{0.3, 0.2, 0.15};
  std::string interference = "ar1";
  double pole = 0.95;
  std::string interference_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--scenario", scenario,
                    "Scenario: interacting | noninteracting")
        ->check(CLI::IsMember({"interacting", "noninteracting"}));
    cmd->add_option("--trials", trials, "Number of trials")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--samples", samples, "Samples per trial")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--burn-in", burn_in, "Discarded warm-up samples")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--cutoffs", cutoffs,
                    "Low-pass cutoffs for the noninteracting channels")
        ->expected(3);
    cmd->add_option("--interference", interference,
                    "Interference kind: ar1 | one-over-f | file")
        ->check(CLI::IsMember({"ar1", "one-over-f", "file"}));
    cmd->add_option("--pole", pole, "AR(1) interference pole");
    cmd->add_option("--interference-file", interference_file,
                    "Timeseries CSV for --interference file");
  }

  ScenarioConfig build() const {
    ScenarioConfig sc;
    sc.scenario = scenario == "interacting" ? Scenario::Interacting
                                            : Scenario::NonInteracting;
    sc.n_trials = trials;
    sc.n_samples = samples;
    sc.burn_in = burn_in;
    for (int i = 0; i < 3; ++i) sc.cutoffs[i] = cutoffs[i];
    sc.interference.kind =
        interference == "ar1" ? InterferenceSpec::Kind::Ar1Colored
        : interference == "one-over-f" ? InterferenceSpec::Kind::OneOverF
                                       : InterferenceSpec::Kind::FromFile;
    sc.interference.pole = pole;
    sc.interference.path = interference_file;
    return sc;
  }
};

void print_diagnostics(const MvarModel& model) {
  if (model.diagnostics.empty()) return;
  for (std::size_t k = 0; k < model.diagnostics.size(); ++k) {
    const auto& d = model.diagnostics[k];
    std::printf(
        "channel %zu: %d iterations (mean), %d pruned (mean), "
        "converged=%s, final rel change %.3g\n",
        k + 1, d.iterations, d.pruned_count, d.converged ? "yes" : "no",
        d.final_rel_change);
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{
      "Multivariate autoregressive connectivity analysis: simulation, "
      "estimation, partial directed coherence, and resampling-based "
      "significance thresholds"};
  app.set_version_flag("--version", MVARPDC_VERSION);
  app.require_subcommand(1);

  // ---- simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand(
      "simulate", "Generate a benchmark trial set (optionally mixed with "
                  "interference) and write it as a timeseries CSV");
  ScenarioFlags sim_scenario;
  sim_scenario.attach(sim);
  std::string sim_sir = "inf";
  std::uint64_t sim_seed = 0;
  std::string sim_output;
  sim->add_option("--sir", sim_sir, kSirHelp);
  sim->add_option("--seed", sim_seed, "Random seed")->required();
  sim->add_option("--output", sim_output, "Output timeseries CSV")->required();

  // ---- estimate -----------------------------------------------------------
  auto* est_cmd = app.add_subcommand(
      "estimate", "Fit an autoregressive model per trial and write the "
                  "trial-averaged coefficients as CSV");
  EstimatorFlags est_flags;
  est_flags.attach(est_cmd);
  std::string est_input, est_output;
  int est_jobs = 1;
  est_cmd->add_option("--input", est_input, "Input timeseries CSV")->required();
  est_cmd->add_option("--output", est_output, "Output coefficients CSV")
      ->required();
  est_cmd->add_option("--jobs", est_jobs, "Worker threads for per-trial fits")
      ->check(CLI::PositiveNumber);

  // ---- pdc ----------------------------------------------------------------
  auto* pdc_cmd = app.add_subcommand(
      "pdc", "Compute partial directed coherence from a coefficients CSV");
  std::string pdc_coeffs, pdc_output;
  int pdc_nfreqs = 128;
  pdc_cmd->add_option("--coeffs", pdc_coeffs, "Input coefficients CSV")
      ->required();
  pdc_cmd->add_option("--n-freqs", pdc_nfreqs, "Frequency grid size")
      ->check(CLI::PositiveNumber);
  pdc_cmd->add_option("--output", pdc_output, "Output PDC CSV")->required();

  // ---- threshold ----------------------------------------------------------
  auto* thr_cmd = app.add_subcommand(
      "threshold", "Derive a significance threshold for the trial-averaged "
                   "PDC of a timeseries CSV (surrogate or permutation)");
  EstimatorFlags thr_est;
  thr_est.attach(thr_cmd);
  std::string thr_input, thr_control, thr_method = "surrogate";
  std::string thr_scope = "per-direction", thr_strategy = "max-over-resamples";
  std::string thr_output, thr_mask_output, thr_pdc_output;
  int thr_nboot = 200, thr_nfreqs = 128, thr_jobs = 1;
  double thr_alpha = 0.05;
  std::uint64_t thr_seed = 0;
  thr_cmd->add_option("--input", thr_input, "Task timeseries CSV")->required();
  thr_cmd->add_option("--threshold-method", thr_method,
                      "surrogate | permutation")
      ->check(CLI::IsMember({"surrogate", "permutation"}));
  thr_cmd->add_option("--control", thr_control,
                      "Control timeseries CSV (permutation only)");
  thr_cmd->add_option("--n-boot", thr_nboot, "Number of resamples");
  thr_cmd->add_option("--alpha", thr_alpha, "Significance level");
  thr_cmd->add_option("--seed", thr_seed, "Random seed for the resampling")
      ->required();
  thr_cmd->add_option("--scope", thr_scope, "per-direction | pooled")
      ->check(CLI::IsMember({"per-direction", "pooled"}));
  thr_cmd
      ->add_option("--strategy", thr_strategy,
                   "max-over-resamples | max-over-bins")
      ->check(CLI::IsMember({"max-over-resamples", "max-over-bins"}));
  thr_cmd->add_option("--n-freqs", thr_nfreqs, "Frequency grid size");
  thr_cmd->add_option("--jobs", thr_jobs, "Worker threads")
      ->check(CLI::PositiveNumber);
  thr_cmd->add_option("--output", thr_output, "Output threshold CSV")
      ->required();
  thr_cmd->add_option("--mask-output", thr_mask_output,
                      "Also write the significance mask of the task PDC");
  thr_cmd->add_option("--pdc-output", thr_pdc_output,
                      "Also write the task trial-averaged PDC");

  // ---- run-paper ----------------------------------------------------------
  auto* run_cmd = app.add_subcommand(
      "run-paper",
      "Run the full benchmark sweep: {interacting, noninteracting} x "
      "{least-squares, sparse-bayes} across an SIR sweep, with surrogate "
      "and permutation thresholds, into one directory per combination");
  std::uint64_t run_seed = 0;
  std::string run_outdir = "paper_run";
  int run_jobs = 1, run_nboot = 200, run_nfreqs = 128;
  int run_trials = 40, run_samples = 600;
  double run_alpha = 0.05;
  std::vector<std::string> run_sweep{"2", "1", "0.5", "0.25"};
  std::string run_thresholding = "both";
  std::string run_scope = "per-direction", run_strategy = "max-over-resamples";
  ScenarioFlags run_scenario;  // interference flags reused; scenario fixed
  run_cmd->add_option("--seed", run_seed, "Master random seed")->required();
  run_cmd->add_option("--output-dir", run_outdir, "Output directory");
  run_cmd->add_option("--jobs", run_jobs, "Worker threads")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--n-boot", run_nboot, "Resamples per threshold");
  run_cmd->add_option("--alpha", run_alpha, "Significance level");
  run_cmd->add_option("--trials", run_trials, "Trials per scenario")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--samples", run_samples, "Samples per trial")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--n-freqs", run_nfreqs, "Frequency grid size");
  run_cmd
      ->add_option("--sir-sweep", run_sweep,
                   std::string("Comma-separated SIR sweep. ") + kSirHelp)
      ->delimiter(',');
  run_cmd->add_option("--thresholding", run_thresholding,
                      "surrogate | permutation | both")
      ->check(CLI::IsMember({"surrogate", "permutation", "both"}));
  run_cmd->add_option("--scope", run_scope, "per-direction | pooled")
      ->check(CLI::IsMember({"per-direction", "pooled"}));
  run_cmd
      ->add_option("--strategy", run_strategy,
                   "max-over-resamples | max-over-bins")
      ->check(CLI::IsMember({"max-over-resamples", "max-over-bins"}));
  run_cmd->add_option("--interference", run_scenario.interference,
                      "Interference kind: ar1 | one-over-f | file")
      ->check(CLI::IsMember({"ar1", "one-over-f", "file"}));
  run_cmd->add_option("--pole", run_scenario.pole, "AR(1) interference pole");
  run_cmd->add_option("--interference-file", run_scenario.interference_file,
                      "Timeseries CSV for --interference file");
  run_cmd->add_option("--burn-in", run_scenario.burn_in,
                      "Discarded warm-up samples")
      ->check(CLI::NonNegativeNumber);

  // ---- replay -------------------------------------------------------------
  auto* replay_cmd = app.add_subcommand(
      "replay", "Re-run a previous experiment from its run.json record");
  std::string replay_json, replay_outdir = "replay_out";
  int replay_jobs = 1;
  replay_cmd->add_option("run_json", replay_json, "Path to run.json")
      ->required();
  replay_cmd->add_option("--output-dir", replay_outdir, "Output directory");
  replay_cmd->add_option("--jobs", replay_jobs, "Worker threads")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) {
    ScenarioConfig sc = sim_scenario.build();
    sc.sir = parse_sir(sim_sir);
    sc.seed = sim_seed;
    sc.validate();
    TrialSet data = sc.scenario == Scenario::Interacting
                        ? generate_interacting(sc)
                        : generate_noninteracting(sc);
    if (!std::isinf(sc.sir)) {
      TrialSet interference =
          make_interference(sc.interference, data.n_trials(),
                            data.n_channels(), data.n_samples(), sc.seed);
      data = mix_at_sir(data, interference, sc.sir);
    }
    save_timeseries_csv(sim_output, data);
    std::printf("wrote %s (%d trials, %d channels, %d samples)\n",
                sim_output.c_str(), data.n_trials(), data.n_channels(),
                data.n_samples());
    return 0;
  }

  if (est_cmd->parsed()) {
    const TrialSet data = load_timeseries_csv(est_input);
    const EstimatorConfig est = est_flags.build();
    const std::vector<MvarModel> models = fit_trials(data, est, est_jobs);
    const MvarModel averaged = average_models(models);
    save_coeffs_csv(est_output, averaged);
    std::printf("wrote %s (order %d, %d channels, averaged over %d trials)\n",
                est_output.c_str(), averaged.order(), averaged.n_channels(),
                data.n_trials());
    print_diagnostics(averaged);
    return 0;
  }

  if (pdc_cmd->parsed()) {
    const MvarModel model = load_coeffs_csv(pdc_coeffs);
    const PdcSpectrum pdc = pdc_of_model(model, pdc_nfreqs);
    save_pdc_csv(pdc_output, pdc);
    std::printf("wrote %s (%d bins, %d channels)\n", pdc_output.c_str(),
                pdc.n_freqs(), pdc.n_channels());
    return 0;
  }

  if (thr_cmd->parsed()) {
    const TrialSet task = load_timeseries_csv(thr_input);
    SignificanceConfig cfg;
    cfg.n_boot = thr_nboot;
    cfg.alpha = thr_alpha;
    cfg.seed = thr_seed;
    cfg.estimator = thr_est.build();
    cfg.n_freqs = thr_nfreqs;
    cfg.scope = thr_scope == "pooled" ? ThresholdScope::PooledDirections
                                      : ThresholdScope::PerDirection;
    cfg.strategy = thr_strategy == "max-over-bins"
                       ? ThresholdStrategy::MaxOverBins
                       : ThresholdStrategy::MaxOverResamples;

    ThresholdCurve curve;
    if (thr_method == "surrogate") {
      curve = surrogate_threshold(task, cfg, thr_jobs);
    } else {
      if (thr_control.empty())
        throw ConfigError("permutation threshold needs --control");
      const TrialSet control = load_timeseries_csv(thr_control);
      const std::vector<MvarModel> task_models =
          fit_trials(task, cfg.estimator, thr_jobs);
      const std::vector<MvarModel> control_models =
          fit_trials(control, cfg.estimator, thr_jobs);
      curve = permutation_threshold(task_models, control_models, cfg, thr_jobs);
    }
    save_threshold_csv(thr_output, curve);
    std::printf("wrote %s\n", thr_output.c_str());

    if (!thr_mask_output.empty() || !thr_pdc_output.empty()) {
      const PdcSpectrum pdc =
          trial_averaged_pdc(task, cfg.estimator, cfg.n_freqs, thr_jobs);
      if (!thr_pdc_output.empty()) {
        save_pdc_csv(thr_pdc_output, pdc);
        std::printf("wrote %s\n", thr_pdc_output.c_str());
      }
      if (!thr_mask_output.empty()) {
        save_mask_csv(thr_mask_output, apply_threshold(pdc, curve));
        std::printf("wrote %s\n", thr_mask_output.c_str());
      }
    }
    return 0;
  }

  if (run_cmd->parsed()) {
    std::vector<double> sweep;
    for (const auto& s : run_sweep) sweep.push_back(parse_sir(s));

    const struct {
      Scenario scenario;
      EstimationMethod method;
      const char* name;
    } combos[] = {
        {Scenario::Interacting, EstimationMethod::LeastSquares,
         "interacting_least-squares"},
        {Scenario::Interacting, EstimationMethod::SparseBayes,
         "interacting_sparse-bayes"},
        {Scenario::NonInteracting, EstimationMethod::LeastSquares,
         "noninteracting_least-squares"},
        {Scenario::NonInteracting, EstimationMethod::SparseBayes,
         "noninteracting_sparse-bayes"},
    };

    for (const auto& combo : combos) {
      ExperimentConfig cfg;
      cfg.scenario = run_scenario.build();
      cfg.scenario.scenario = combo.scenario;
      cfg.scenario.n_trials = run_trials;
      cfg.scenario.n_samples = run_samples;
      cfg.estimator.method = combo.method;
      cfg.sir_sweep = sweep;
      cfg.thresholding = run_thresholding == "surrogate"
                             ? ThresholdingChoice::Surrogate
                         : run_thresholding == "permutation"
                             ? ThresholdingChoice::Permutation
                             : ThresholdingChoice::Both;
      cfg.n_boot = run_nboot;
      cfg.alpha = run_alpha;
      cfg.scope = run_scope == "pooled" ? ThresholdScope::PooledDirections
                                        : ThresholdScope::PerDirection;
      cfg.strategy = run_strategy == "max-over-bins"
                         ? ThresholdStrategy::MaxOverBins
                         : ThresholdStrategy::MaxOverResamples;
      cfg.n_freqs = run_nfreqs;
      cfg.seed = run_seed;
      cfg.jobs = run_jobs;

      const ExperimentResult res = run_experiment(cfg);
      const std::string dir = run_outdir + "/" + combo.name;
      const std::vector<std::string> files = emit_outputs(res, dir);
      double total = 0.0;
      if (!res.timings.empty() && res.timings.back().stage == "total")
        total = res.timings.back().seconds;
      std::printf("%s: %zu files in %s (%.1f s)\n", combo.name, files.size(),
                  dir.c_str(), total);
      for (const auto& n : res.notes)
        std::printf("  note: %s\n", n.c_str());
    }
    return 0;
  }

  if (replay_cmd->parsed()) {
    ExperimentConfig cfg = load_run_config(replay_json);
    cfg.jobs = replay_jobs;
    const ExperimentResult res = run_experiment(cfg);
    const std::vector<std::string> files = emit_outputs(res, replay_outdir);
    std::printf("replayed %s: %zu files in %s\n", replay_json.c_str(),
                files.size(), replay_outdir.c_str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeMismatch& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InsufficientSamples& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const OddTrialCount& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NonStationaryModel& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const IllConditioned& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalBreakdown& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const FileFormatError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return 4;
  } catch (const IoError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
