#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvarpdc/csv_io.hpp"
#include "mvarpdc/errors.hpp"
#include "mvarpdc/pdc.hpp"
#include "mvarpdc/random.hpp"
#include "mvarpdc/signalgen.hpp"
#include "mvarpdc/significance.hpp"
#include "mvarpdc/trial_set.hpp"
#include "mvarpdc/version.hpp"

namespace mvarpdc {

enum class ThresholdingChoice { Surrogate, Permutation, Both };

// One sweep: generate a scenario once, mix it at every requested SIR, fit,
// compute trial-averaged PDC and the requested significance thresholds.
struct ExperimentConfig {
  ScenarioConfig scenario;
  EstimatorConfig estimator;
  std::vector<double> sir_sweep{2.0, 1.0, 0.5, 0.25};
  ThresholdingChoice thresholding = ThresholdingChoice::Both;
  int n_boot = 200;
  double alpha = 0.05;
  ThresholdScope scope = ThresholdScope::PerDirection;
  ThresholdStrategy strategy = ThresholdStrategy::MaxOverResamples;
  int n_freqs = 128;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const {
    scenario.validate();
    estimator.validate();
    if (sir_sweep.empty()) throw ConfigError("sir_sweep must not be empty");
    for (double s : sir_sweep)
      if (!(s > 0.0)) throw ConfigError("every sweep SIR must be positive");
    if (n_boot < 20) throw ConfigError("n_boot must be >= 20");
    if (!(alpha > 0.0) || !(alpha < 1.0))
      throw ConfigError("alpha must lie in (0, 1)");
    if (n_freqs < 2) throw ConfigError("n_freqs must be >= 2");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
  }
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct SirResult {
  double sir = 0.0;
  std::vector<MvarModel> trial_models;
  MvarModel averaged;
  PdcSpectrum pdc;
  std::optional<ThresholdCurve> surrogate;
  std::optional<SignificanceMask> surrogate_mask;
  std::optional<ThresholdCurve> permutation;
  std::optional<SignificanceMask> permutation_mask;
  std::vector<std::string> notes;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SirResult> per_sir;
  std::vector<StageTiming> timings;
  std::vector<std::string> notes;
};

inline std::string format_sir(double sir) {
  if (std::isinf(sir)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", sir);
  return buf;
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <typename F>
  auto run(const std::string& stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      invoke_annotated(stage, f);
      record(stage, start);
    } else {
      auto out = invoke_annotated(stage, f);
      record(stage, start);
      return out;
    }
  }

 private:
  template <typename F>
  auto invoke_annotated(const std::string& stage, F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      rethrow_annotated(e, "stage " + stage);
    }
  }

  void record(const std::string& stage,
              std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - start;
    sink_.push_back(StageTiming{stage, dt.count()});
  }

  std::vector<StageTiming>& sink_;
};

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  res.config = cfg;
  detail::StageClock clock(res.timings);
  const auto t_start = std::chrono::steady_clock::now();

  ScenarioConfig sc = cfg.scenario;
  sc.seed = cfg.seed;
  const TrialSet signal = clock.run("generate", [&] {
    return sc.scenario == Scenario::Interacting ? generate_interacting(sc)
                                                : generate_noninteracting(sc);
  });

  bool need_interference = false;
  for (double s : cfg.sir_sweep)
    if (!std::isinf(s)) need_interference = true;

  TrialSet interference;
  if (need_interference) {
    interference = clock.run("interference", [&] {
      // keyed under kInterference streams; independent of the signal draws
      return make_interference(sc.interference, signal.n_trials(),
                               signal.n_channels(), signal.n_samples(),
                               cfg.seed);
    });
  }

  for (std::size_t si = 0; si < cfg.sir_sweep.size(); ++si) {
    const double sir = cfg.sir_sweep[si];
    const std::string label = format_sir(sir);

    SirResult r;
    r.sir = sir;

    const TrialSet mixed = clock.run("mix@" + label, [&] {
      return std::isinf(sir) ? signal : mix_at_sir(signal, interference, sir);
    });

    r.trial_models = clock.run("fit@" + label, [&] {
      return fit_trials(mixed, cfg.estimator, cfg.jobs);
    });
    r.averaged = average_models(r.trial_models);
    r.pdc = clock.run("pdc@" + label, [&] {
      return trial_averaged_pdc(r.trial_models, cfg.n_freqs);
    });

    SignificanceConfig scfg;
    scfg.n_boot = cfg.n_boot;
    scfg.alpha = cfg.alpha;
    scfg.estimator = cfg.estimator;
    scfg.n_freqs = cfg.n_freqs;
    scfg.scope = cfg.scope;
    scfg.strategy = cfg.strategy;

    if (cfg.thresholding != ThresholdingChoice::Permutation) {
      scfg.seed = rng::derive_stream(cfg.seed, {rng::kSurrogate, si});
      r.surrogate = clock.run("surrogate@" + label, [&] {
        return surrogate_threshold(mixed, scfg, cfg.jobs);
      });
      r.surrogate_mask = apply_threshold(r.pdc, *r.surrogate);
    }

    if (cfg.thresholding != ThresholdingChoice::Surrogate) {
      if (std::isinf(sir)) {
        r.notes.push_back(
            "permutation threshold skipped at sir=inf: the control condition "
            "is interference-only and there is no interference to match");
      } else {
        const TrialSet control = clock.run("control@" + label, [&] {
          // fresh interference, scaled per trial to the exact power the task
          // interference contributed to the mix at this SIR
          TrialSet fresh = make_interference(
              sc.interference, signal.n_trials(), signal.n_channels(),
              signal.n_samples(), rng::derive_stream(cfg.seed, {rng::kControl}));
          const std::vector<double> gains =
              mixing_gains(signal, interference, sir);
          TrialSet out;
          out.seed = fresh.seed;
          out.trials.reserve(fresh.trials.size());
          for (int m = 0; m < fresh.n_trials(); ++m) {
            const double p_task = interference.trials[m].squaredNorm();
            const double p_fresh = fresh.trials[m].squaredNorm();
            const double scale = gains[m] * std::sqrt(p_task / p_fresh);
            out.trials.push_back(scale * fresh.trials[m]);
          }
          return out;
        });

        const std::vector<MvarModel> control_models =
            clock.run("controlfit@" + label, [&] {
              return fit_trials(control, cfg.estimator, cfg.jobs);
            });
        scfg.seed = rng::derive_stream(cfg.seed, {rng::kPermutation, si});
        r.permutation = clock.run("permutation@" + label, [&] {
          return permutation_threshold(r.trial_models, control_models, scfg,
                                       cfg.jobs);
        });
        r.permutation_mask = apply_threshold(r.pdc, *r.permutation);
      }
    }

    for (const auto& n : r.notes) res.notes.push_back("sir=" + label + ": " + n);
    res.per_sir.push_back(std::move(r));
  }

  const std::chrono::duration<double> total =
      std::chrono::steady_clock::now() - t_start;
  res.timings.push_back(StageTiming{"total", total.count()});
  return res;
}

// ---- JSON (de)serialization of configs and the run record ------------------

namespace detail {

inline std::string to_string(Scenario s) {
  return s == Scenario::Interacting ? "interacting" : "noninteracting";
}
inline std::string to_string(InterferenceSpec::Kind k) {
  switch (k) {
    case InterferenceSpec::Kind::Ar1Colored: return "ar1";
    case InterferenceSpec::Kind::OneOverF: return "one-over-f";
    default: return "file";
  }
}
inline std::string to_string(EstimationMethod m) {
  return m == EstimationMethod::LeastSquares ? "least-squares" : "sparse-bayes";
}
inline std::string to_string(LambdaInit v) {
  return v == LambdaInit::InverseVariance ? "inverse-variance" : "unit";
}
inline std::string to_string(LambdaStructure v) {
  return v == LambdaStructure::PerSample ? "per-sample" : "isotropic";
}
inline std::string to_string(ThresholdingChoice v) {
  switch (v) {
    case ThresholdingChoice::Surrogate: return "surrogate";
    case ThresholdingChoice::Permutation: return "permutation";
    default: return "both";
  }
}
inline std::string to_string(ThresholdScope v) {
  return v == ThresholdScope::PerDirection ? "per-direction" : "pooled";
}
inline std::string to_string(ThresholdStrategy v) {
  return v == ThresholdStrategy::MaxOverResamples ? "max-over-resamples"
                                                  : "max-over-bins";
}

template <typename T>
T enum_from_string(const std::string& s, const char* what,
                   std::initializer_list<std::pair<const char*, T>> table) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw FileFormatError(std::string("unknown ") + what + " '" + s + "'");
}

inline nlohmann::json sir_to_json(double sir) {
  if (std::isinf(sir)) return "inf";
  return sir;
}
inline double sir_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf")
      return std::numeric_limits<double>::infinity();
    throw FileFormatError("bad SIR value '" + j.get<std::string>() + "'");
  }
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["scenario"] = {
      {"kind", detail::to_string(cfg.scenario.scenario)},
      {"n_trials", cfg.scenario.n_trials},
      {"n_samples", cfg.scenario.n_samples},
      {"burn_in", cfg.scenario.burn_in},
      {"cutoffs", cfg.scenario.cutoffs},
      {"interference",
       {{"kind", detail::to_string(cfg.scenario.interference.kind)},
        {"pole", cfg.scenario.interference.pole},
        {"path", cfg.scenario.interference.path}}},
  };
  j["estimator"] = {
      {"method", detail::to_string(cfg.estimator.method)},
      {"order", cfg.estimator.order},
      {"em",
       {{"max_iters", cfg.estimator.em.max_iters},
        {"rel_tol", cfg.estimator.em.rel_tol},
        {"prune_threshold", cfg.estimator.em.prune_threshold},
        {"nu_init", cfg.estimator.em.nu_init},
        {"lambda_init", detail::to_string(cfg.estimator.em.lambda_init)},
        {"lambda_structure",
         detail::to_string(cfg.estimator.em.lambda_structure)}}},
  };
  nlohmann::json sweep = nlohmann::json::array();
  for (double s : cfg.sir_sweep) sweep.push_back(detail::sir_to_json(s));
  j["sir_sweep"] = sweep;
  j["thresholding"] = detail::to_string(cfg.thresholding);
  j["significance"] = {
      {"n_boot", cfg.n_boot},
      {"alpha", cfg.alpha},
      {"scope", detail::to_string(cfg.scope)},
      {"strategy", detail::to_string(cfg.strategy)},
  };
  j["n_freqs"] = cfg.n_freqs;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::enum_from_string;
  ExperimentConfig cfg;
  try {
    const auto& sc = j.at("scenario");
    cfg.scenario.scenario = enum_from_string<Scenario>(
        sc.at("kind").get<std::string>(), "scenario",
        {{"interacting", Scenario::Interacting},
         {"noninteracting", Scenario::NonInteracting}});
    cfg.scenario.n_trials = sc.at("n_trials").get<int>();
    cfg.scenario.n_samples = sc.at("n_samples").get<int>();
    cfg.scenario.burn_in = sc.at("burn_in").get<int>();
    const auto cut = sc.at("cutoffs");
    if (!cut.is_array() || cut.size() != 3)
      throw FileFormatError("scenario.cutoffs must be a 3-element array");
    for (int i = 0; i < 3; ++i) cfg.scenario.cutoffs[i] = cut[i].get<double>();
    const auto& intf = sc.at("interference");
    cfg.scenario.interference.kind = enum_from_string<InterferenceSpec::Kind>(
        intf.at("kind").get<std::string>(), "interference kind",
        {{"ar1", InterferenceSpec::Kind::Ar1Colored},
         {"one-over-f", InterferenceSpec::Kind::OneOverF},
         {"file", InterferenceSpec::Kind::FromFile}});
    cfg.scenario.interference.pole = intf.at("pole").get<double>();
    cfg.scenario.interference.path = intf.at("path").get<std::string>();

    const auto& est = j.at("estimator");
    cfg.estimator.method = enum_from_string<EstimationMethod>(
        est.at("method").get<std::string>(), "estimator method",
        {{"least-squares", EstimationMethod::LeastSquares},
         {"sparse-bayes", EstimationMethod::SparseBayes}});
    cfg.estimator.order = est.at("order").get<int>();
    const auto& em = est.at("em");
    cfg.estimator.em.max_iters = em.at("max_iters").get<int>();
    cfg.estimator.em.rel_tol = em.at("rel_tol").get<double>();
    cfg.estimator.em.prune_threshold = em.at("prune_threshold").get<double>();
    cfg.estimator.em.nu_init = em.at("nu_init").get<double>();
    cfg.estimator.em.lambda_init = enum_from_string<LambdaInit>(
        em.at("lambda_init").get<std::string>(), "lambda_init",
        {{"inverse-variance", LambdaInit::InverseVariance},
         {"unit", LambdaInit::Unit}});
    cfg.estimator.em.lambda_structure = enum_from_string<LambdaStructure>(
        em.at("lambda_structure").get<std::string>(), "lambda_structure",
        {{"per-sample", LambdaStructure::PerSample},
         {"isotropic", LambdaStructure::Isotropic}});

    cfg.sir_sweep.clear();
    for (const auto& s : j.at("sir_sweep"))
      cfg.sir_sweep.push_back(detail::sir_from_json(s));
    cfg.thresholding = enum_from_string<ThresholdingChoice>(
        j.at("thresholding").get<std::string>(), "thresholding",
        {{"surrogate", ThresholdingChoice::Surrogate},
         {"permutation", ThresholdingChoice::Permutation},
         {"both", ThresholdingChoice::Both}});
    const auto& sig = j.at("significance");
    cfg.n_boot = sig.at("n_boot").get<int>();
    cfg.alpha = sig.at("alpha").get<double>();
    cfg.scope = enum_from_string<ThresholdScope>(
        sig.at("scope").get<std::string>(), "scope",
        {{"per-direction", ThresholdScope::PerDirection},
         {"pooled", ThresholdScope::PooledDirections}});
    cfg.strategy = enum_from_string<ThresholdStrategy>(
        sig.at("strategy").get<std::string>(), "strategy",
        {{"max-over-resamples", ThresholdStrategy::MaxOverResamples},
         {"max-over-bins", ThresholdStrategy::MaxOverBins}});
    cfg.n_freqs = j.at("n_freqs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.jobs = j.at("jobs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FileFormatError(std::string("bad experiment config: ") + e.what());
  }
  return cfg;
}

// Writes all result artifacts into `dir` and returns the manifest (relative
// file names, run.json last).  Layout per SIR <label>:
//   pdc_<label>.csv, coeffs_<label>.csv,
//   threshold_surrogate_<label>.csv, mask_surrogate_<label>.csv,
//   threshold_permutation_<label>.csv, mask_permutation_<label>.csv
inline std::vector<std::string> emit_outputs(const ExperimentResult& res,
                                             const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir +
                  "': " + ec.message());

  std::vector<std::string> manifest;
  auto emit = [&](const std::string& name, auto&& writer) {
    writer(dir + "/" + name);
    manifest.push_back(name);
  };

  for (const auto& r : res.per_sir) {
    const std::string label = format_sir(r.sir);
    emit("pdc_" + label + ".csv",
         [&](const std::string& p) { save_pdc_csv(p, r.pdc); });
    emit("coeffs_" + label + ".csv",
         [&](const std::string& p) { save_coeffs_csv(p, r.averaged); });
    if (r.surrogate)
      emit("threshold_surrogate_" + label + ".csv",
           [&](const std::string& p) { save_threshold_csv(p, *r.surrogate); });
    if (r.surrogate_mask)
      emit("mask_surrogate_" + label + ".csv", [&](const std::string& p) {
        save_mask_csv(p, *r.surrogate_mask);
      });
    if (r.permutation)
      emit("threshold_permutation_" + label + ".csv",
           [&](const std::string& p) { save_threshold_csv(p, *r.permutation); });
    if (r.permutation_mask)
      emit("mask_permutation_" + label + ".csv", [&](const std::string& p) {
        save_mask_csv(p, *r.permutation_mask);
      });
  }

  nlohmann::json run;
  run["format_version"] = 1;
  run["library_version"] = MVARPDC_VERSION;
  run["seed"] = res.config.seed;
  run["config"] = config_to_json(res.config);
  run["conventions"] = {
      {"sir",
       "RMS amplitude ratio of signal to scaled interference over all "
       "channels and samples of a trial; 'inf' disables mixing"},
      {"control_condition",
       "fresh interference draw scaled per trial to the exact power the task "
       "interference contributed at that SIR"},
      {"null_std", "population convention (divide by the resample count)"},
  };
  run["notes"] = res.notes;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& t : res.timings)
    stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  run["timings"] = stages;
  nlohmann::json files = manifest;
  files.push_back("run.json");
  run["outputs"] = files;

  {
    const std::string path = dir + "/run.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << run.dump(2) << '\n';
    if (!out) throw IoError("failed while writing '" + path + "'");
  }
  manifest.push_back("run.json");
  return manifest;
}

// Reads back the config of a previous run for bit-identical re-execution.
inline ExperimentConfig load_run_config(const std::string& run_json_path) {
  std::ifstream in(run_json_path);
  if (!in) throw IoError("cannot open '" + run_json_path + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FileFormatError(run_json_path + ": " + e.what());
  }
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw FileFormatError(run_json_path + ": missing format_version");
  if (j["format_version"].get<int>() != 1)
    throw FileFormatError(run_json_path + ": unsupported format_version " +
                          j["format_version"].dump());
  if (!j.contains("config"))
    throw FileFormatError(run_json_path + ": missing config");
  return config_from_json(j["config"]);
}

}  // namespace mvarpdc
