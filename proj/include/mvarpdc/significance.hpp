#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mvarpdc/errors.hpp"
#include "mvarpdc/least_squares.hpp"
#include "mvarpdc/mvar_model.hpp"
#include "mvarpdc/parallel.hpp"
#include "mvarpdc/pdc.hpp"
#include "mvarpdc/random.hpp"
#include "mvarpdc/sparse_bayes.hpp"
#include "mvarpdc/trial_set.hpp"
#include "mvarpdc/yule_walker.hpp"

namespace mvarpdc {

enum class ThresholdMethod { SurrogateBootstrap, PermutationTest };

// PerDirection corrects over frequencies separately for every ordered channel
// pair; PooledDirections additionally pools the null statistics across pairs.
enum class ThresholdScope { PerDirection, PooledDirections };

// MaxOverResamples: for every bin take the max standardized null value across
// resamples, then threshold at a quantile of those per-bin maxima over the
// frequency grid.  MaxOverBins is the conventional max-statistic scheme: max
// over bins within each resample, quantile across resamples.
enum class ThresholdStrategy { MaxOverResamples, MaxOverBins };

struct EstimatorConfig {
  EstimationMethod method = EstimationMethod::LeastSquares;
  int order = 2;
  EmConfig em;

  void validate() const {
    if (order < 1) throw ConfigError("model order must be >= 1");
    em.validate();
  }
};

struct SignificanceConfig {
  int n_boot = 200;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  int n_freqs = 128;
  ThresholdScope scope = ThresholdScope::PerDirection;
  ThresholdStrategy strategy = ThresholdStrategy::MaxOverResamples;

  void validate() const {
    if (n_boot < 20) throw ConfigError("n_boot must be >= 20");
    if (!(alpha > 0.0) || !(alpha < 1.0))
      throw ConfigError("alpha must lie in (0, 1)");
    if (n_freqs < 2) throw ConfigError("n_freqs must be >= 2");
    estimator.validate();
  }
};

// An off-diagonal (source, target) pair whose null sample had (numerically)
// zero spread at some bin; its threshold falls back to the null mean.
struct DegenerateNullFlag {
  int source = 0;
  int target = 0;
  int bin = 0;
};

// The sorted max-statistic sample a threshold was read from, kept for audit.
// source/target are -1 for the pooled scope.
struct NullSample {
  int source = -1;
  int target = -1;
  std::vector<double> sorted_stats;
  double t_threshold = 0.0;
};

struct ThresholdCurve {
  std::vector<Eigen::MatrixXd> threshold;  // per bin, (target, source) layout
  std::vector<double> freqs;
  ThresholdMethod method = ThresholdMethod::SurrogateBootstrap;
  double alpha = 0.05;
  ThresholdScope scope = ThresholdScope::PerDirection;
  ThresholdStrategy strategy = ThresholdStrategy::MaxOverResamples;
  std::vector<Eigen::MatrixXd> null_mean;  // per bin
  std::vector<Eigen::MatrixXd> null_std;   // per bin (population convention)
  std::vector<NullSample> samples;
  std::vector<DegenerateNullFlag> degenerate;

  int n_freqs() const { return static_cast<int>(threshold.size()); }
  int n_channels() const {
    return threshold.empty() ? 0
                             : static_cast<int>(threshold.front().rows());
  }
  double value(int source, int target, int bin) const {
    return threshold[bin](target, source);
  }
};

struct SignificanceMask {
  std::vector<Eigen::ArrayXXi> significant;  // per bin, (target, source), 0/1
  std::vector<double> freqs;

  int n_freqs() const { return static_cast<int>(significant.size()); }
  int n_channels() const {
    return significant.empty()
               ? 0
               : static_cast<int>(significant.front().rows());
  }
  bool value(int source, int target, int bin) const {
    return significant[bin](target, source) != 0;
  }
};

// Phase-randomized copy of one trial: each channel's spectrum keeps its
// magnitudes but gets fresh uniform phases (conjugate-symmetric, DC and
// Nyquist bins untouched), so per-channel power spectra are preserved while
// cross-channel phase relations are destroyed.  Each channel uses its own
// sub-stream of `seed`.
inline Eigen::MatrixXd phase_randomize(const Eigen::MatrixXd& series,
                                       std::uint64_t seed) {
  const int kc = static_cast<int>(series.rows());
  const int n = static_cast<int>(series.cols());
  Eigen::MatrixXd out(kc, n);
  Eigen::FFT<double> fft;
  std::vector<double> time(n);
  std::vector<std::complex<double>> spec;

  for (int c = 0; c < kc; ++c) {
    for (int t = 0; t < n; ++t) time[t] = series(c, t);
    fft.fwd(spec, time);

    rng::RandomStream rs(
        rng::derive_stream(seed, {static_cast<std::uint64_t>(c)}));
    for (int m = 1; m < (n + 1) / 2; ++m) {
      const double phase =
          rs.uniform_open_closed(-std::numbers::pi, std::numbers::pi);
      spec[m] *= std::polar(1.0, phase);
      spec[n - m] = std::conj(spec[m]);
    }
    // for even n the Nyquist bin spec[n/2] stays untouched (it must be real)

    fft.inv(time, spec);
    for (int t = 0; t < n; ++t) out(c, t) = time[t];
  }
  return out;
}

// Independent per-trial fits (parallelizable; results do not depend on the
// job count because every trial writes its own slot).
inline std::vector<MvarModel> fit_trials(const TrialSet& trials,
                                         const EstimatorConfig& est,
                                         int jobs = 1) {
  est.validate();
  std::vector<MvarModel> models(trials.n_trials());
  parallel_for(trials.trials.size(), jobs, [&](std::size_t i) {
    YuleWalkerSystem sys = build_yule_walker(trials.trials[i], est.order);
    models[i] = est.method == EstimationMethod::LeastSquares
                    ? estimate_least_squares(sys)
                    : estimate_sparse_bayes(sys, est.em);
  });
  return models;
}

inline PdcSpectrum trial_averaged_pdc(const std::vector<MvarModel>& models,
                                      int n_freqs) {
  std::vector<SpectralCoeffMatrix> transforms;
  transforms.reserve(models.size());
  for (const auto& m : models)
    transforms.push_back(spectral_transform(m, n_freqs));
  return pdc_trial_averaged(transforms);
}

inline PdcSpectrum trial_averaged_pdc(const TrialSet& trials,
                                      const EstimatorConfig& est, int n_freqs,
                                      int jobs = 1) {
  return trial_averaged_pdc(fit_trials(trials, est, jobs), n_freqs);
}

// Turns a sample of null-distribution PDC spectra into a threshold curve.
//
// Per (direction, bin) the null values are standardized with their mean and
// population standard deviation across resamples.  The standardized values
// are reduced with the configured strategy/scope to one sorted max-statistic
// sample per direction (or one pooled sample); the statistic threshold is its
// ceil((1-alpha)*n)-th order statistic, mapped back to the PDC scale per bin
// as t * std + mean.  Bins with (numerically) zero null spread get the null
// mean as threshold and a DegenerateNullFlag instead of an exception.
inline ThresholdCurve threshold_from_null(
    const std::vector<PdcSpectrum>& nulls, const SignificanceConfig& cfg,
    ThresholdMethod method) {
  cfg.validate();
  if (nulls.size() < 2)
    throw ConfigError("need at least two null spectra to form a threshold");
  const int nb = nulls.front().n_freqs();
  const int kc = nulls.front().n_channels();
  for (const auto& s : nulls)
    if (s.n_freqs() != nb || s.n_channels() != kc)
      throw ShapeMismatch("null spectra differ in shape");
  const int n_res = static_cast<int>(nulls.size());

  ThresholdCurve out;
  out.freqs = nulls.front().freqs;
  out.method = method;
  out.alpha = cfg.alpha;
  out.scope = cfg.scope;
  out.strategy = cfg.strategy;
  out.null_mean.assign(nb, Eigen::MatrixXd::Zero(kc, kc));
  out.null_std.assign(nb, Eigen::MatrixXd::Zero(kc, kc));
  out.threshold.assign(nb, Eigen::MatrixXd::Zero(kc, kc));

  for (int b = 0; b < nb; ++b) {
    for (const auto& s : nulls) out.null_mean[b] += s.psi[b];
    out.null_mean[b] /= n_res;
    for (const auto& s : nulls)
      out.null_std[b] +=
          (s.psi[b] - out.null_mean[b]).cwiseProduct(s.psi[b] - out.null_mean[b]);
    out.null_std[b] = (out.null_std[b] / n_res).cwiseSqrt();
  }

  constexpr double kDegenerate = 1e-14;
  auto is_degenerate = [&](int j, int k, int b) {
    return out.null_std[b](j, k) < kDegenerate;
  };
  // standardized null value of resample r for direction k -> j at bin b
  auto tval = [&](int r, int j, int k, int b) {
    return (nulls[r].psi[b](j, k) - out.null_mean[b](j, k)) /
           out.null_std[b](j, k);
  };

  auto order_stat = [&](std::vector<double>& sample) {
    std::sort(sample.begin(), sample.end());
    const int n = static_cast<int>(sample.size());
    int omega = static_cast<int>(std::ceil((1.0 - cfg.alpha) * n));
    omega = std::clamp(omega, 1, n);
    return sample[omega - 1];
  };

  struct Direction {
    int source;
    int target;
  };
  std::vector<Direction> dirs;
  for (int k = 0; k < kc; ++k)
    for (int j = 0; j < kc; ++j)
      if (j != k) dirs.push_back(Direction{k, j});

  for (int b = 0; b < nb; ++b)
    for (const auto& d : dirs)
      if (is_degenerate(d.target, d.source, b))
        out.degenerate.push_back(DegenerateNullFlag{d.source, d.target, b});

  // Collects the reduced max-statistic sample for a group of directions.
  auto reduced_sample = [&](const std::vector<Direction>& group) {
    std::vector<double> sample;
    if (cfg.strategy == ThresholdStrategy::MaxOverResamples) {
      // one entry per usable bin: max across resamples (and the group)
      for (int b = 0; b < nb; ++b) {
        double best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (const auto& d : group) {
          if (is_degenerate(d.target, d.source, b)) continue;
          any = true;
          for (int r = 0; r < n_res; ++r)
            best = std::max(best, tval(r, d.target, d.source, b));
        }
        if (any) sample.push_back(best);
      }
    } else {
      // one entry per resample: max across bins (and the group)
      for (int r = 0; r < n_res; ++r) {
        double best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (const auto& d : group)
          for (int b = 0; b < nb; ++b) {
            if (is_degenerate(d.target, d.source, b)) continue;
            any = true;
            best = std::max(best, tval(r, d.target, d.source, b));
          }
        if (any) sample.push_back(best);
      }
    }
    return sample;
  };

  auto fill_direction = [&](const Direction& d, double t_threshold) {
    for (int b = 0; b < nb; ++b) {
      const double mean = out.null_mean[b](d.target, d.source);
      if (is_degenerate(d.target, d.source, b)) {
        out.threshold[b](d.target, d.source) = mean;
      } else {
        const double sd = out.null_std[b](d.target, d.source);
        out.threshold[b](d.target, d.source) =
            std::max(0.0, mean + t_threshold * sd);
      }
    }
  };

  if (cfg.scope == ThresholdScope::PerDirection) {
    for (const auto& d : dirs) {
      std::vector<double> sample = reduced_sample({d});
      NullSample rec;
      rec.source = d.source;
      rec.target = d.target;
      if (sample.empty()) {
        // fully degenerate direction: thresholds are the null means
        rec.t_threshold = 0.0;
      } else {
        rec.t_threshold = order_stat(sample);
        rec.sorted_stats = std::move(sample);
      }
      fill_direction(d, rec.t_threshold);
      out.samples.push_back(std::move(rec));
    }
  } else {
    std::vector<double> sample = reduced_sample(dirs);
    NullSample rec;
    rec.t_threshold = sample.empty() ? 0.0 : order_stat(sample);
    rec.sorted_stats = std::move(sample);
    for (const auto& d : dirs) fill_direction(d, rec.t_threshold);
    out.samples.push_back(std::move(rec));
  }
  return out;
}

// Surrogate-bootstrap threshold: n_boot phase-randomized copies of the trial
// set are pushed through the identical fit + trial-averaged PDC pipeline and
// reduced by threshold_from_null.  Resamples run concurrently when jobs > 1;
// the result is independent of the job count (per-resample seed streams).
inline ThresholdCurve surrogate_threshold(const TrialSet& trials,
                                          const SignificanceConfig& cfg,
                                          int jobs = 1) {
  cfg.validate();
  if (trials.n_trials() < 1)
    throw ConfigError("surrogate threshold needs at least one trial");

  std::vector<PdcSpectrum> nulls(cfg.n_boot);
  parallel_for(static_cast<std::size_t>(cfg.n_boot), jobs, [&](std::size_t r) {
    TrialSet surrogate;
    surrogate.seed = trials.seed;
    surrogate.trials.reserve(trials.trials.size());
    for (std::size_t m = 0; m < trials.trials.size(); ++m)
      surrogate.trials.push_back(phase_randomize(
          trials.trials[m],
          rng::derive_stream(cfg.seed, {rng::kSurrogate,
                                        static_cast<std::uint64_t>(r),
                                        static_cast<std::uint64_t>(m)})));
    nulls[r] = trial_averaged_pdc(surrogate, cfg.estimator, cfg.n_freqs, 1);
  });
  return threshold_from_null(nulls, cfg, ThresholdMethod::SurrogateBootstrap);
}

// Permutation-test threshold from pre-fitted per-trial models of a task and
// a control condition.  Every resample draws half of each pool without
// replacement, averages the selected coefficient transforms, and evaluates
// the trial-averaged PDC; the null sample is reduced exactly like the
// surrogate one.
inline ThresholdCurve permutation_threshold(
    const std::vector<MvarModel>& task, const std::vector<MvarModel>& control,
    const SignificanceConfig& cfg, int jobs = 1) {
  cfg.validate();
  if (task.size() != control.size())
    throw ShapeMismatch("task and control trial counts differ");
  const std::size_t n_e = task.size();
  if (n_e == 0) throw ConfigError("permutation threshold needs trials");
  if (n_e % 2 != 0)
    throw OddTrialCount("permutation split needs an even trial count");
  for (const auto& m : task)
    if (!m.same_shape(task.front()))
      throw ShapeMismatch("task models differ in shape");
  for (const auto& m : control)
    if (!m.same_shape(task.front()))
      throw ShapeMismatch("control models differ in shape");

  // transform every model once; resamples only average pre-computed matrices
  std::vector<SpectralCoeffMatrix> pool;
  pool.reserve(2 * n_e);
  for (const auto& m : task) pool.push_back(spectral_transform(m, cfg.n_freqs));
  for (const auto& m : control)
    pool.push_back(spectral_transform(m, cfg.n_freqs));

  const std::size_t half = n_e / 2;
  std::vector<PdcSpectrum> nulls(cfg.n_boot);
  parallel_for(static_cast<std::size_t>(cfg.n_boot), jobs, [&](std::size_t r) {
    rng::RandomStream rs(rng::derive_stream(
        cfg.seed, {rng::kPermutation, static_cast<std::uint64_t>(r)}));
    std::vector<std::size_t> from_task =
        rng::sample_without_replacement(n_e, half, rs);
    std::vector<std::size_t> from_control =
        rng::sample_without_replacement(n_e, half, rs);

    std::vector<SpectralCoeffMatrix> chosen;
    chosen.reserve(n_e);
    for (std::size_t i : from_task) chosen.push_back(pool[i]);
    for (std::size_t i : from_control) chosen.push_back(pool[n_e + i]);
    nulls[r] = pdc_trial_averaged(chosen);
  });
  return threshold_from_null(nulls, cfg, ThresholdMethod::PermutationTest);
}

// Pointwise comparison of a PDC spectrum against a threshold curve.  Both
// must live on the same frequency grid.  Diagonal entries are never marked.
inline SignificanceMask apply_threshold(const PdcSpectrum& pdc,
                                        const ThresholdCurve& thr) {
  if (pdc.n_freqs() != thr.n_freqs() || pdc.n_channels() != thr.n_channels())
    throw ShapeMismatch("PDC and threshold grids differ in shape");
  for (int b = 0; b < pdc.n_freqs(); ++b)
    if (pdc.freqs[b] != thr.freqs[b])
      throw ShapeMismatch("PDC and threshold frequency grids differ");

  SignificanceMask mask;
  mask.freqs = pdc.freqs;
  const int kc = pdc.n_channels();
  mask.significant.assign(pdc.n_freqs(), Eigen::ArrayXXi::Zero(kc, kc));
  for (int b = 0; b < pdc.n_freqs(); ++b)
    for (int k = 0; k < kc; ++k)
      for (int j = 0; j < kc; ++j)
        if (j != k && pdc.psi[b](j, k) > thr.threshold[b](j, k))
          mask.significant[b](j, k) = 1;
  return mask;
}

}  // namespace mvarpdc
