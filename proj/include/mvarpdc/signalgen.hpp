#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mvarpdc/csv_io.hpp"
#include "mvarpdc/errors.hpp"
#include "mvarpdc/random.hpp"
#include "mvarpdc/trial_set.hpp"

namespace mvarpdc {

// The three-channel order-2 benchmark generator with two directed
// interactions (channel 2 drives 3, channel 3 drives 1); everything else is
// autonomous.  Innovations are unit-variance white noise.
inline std::vector<Eigen::MatrixXd> interacting_generator() {
  Eigen::MatrixXd a1(3, 3), a2(3, 3);
  a1 << 0.8, 0.0, 0.4,
        0.0, 0.9, 0.0,
        0.0, 0.5, 0.5;
  a2 << -0.5, 0.0, 0.0,
        0.0, -0.8, 0.0,
        0.0, 0.0, -0.2;
  return {a1, a2};
}

// Largest eigenvalue magnitude of the companion matrix; < 1 iff the
// autoregression is stable.
inline double companion_spectral_radius(
    const std::vector<Eigen::MatrixXd>& coeffs) {
  if (coeffs.empty()) throw ConfigError("no coefficient matrices");
  const int kc = static_cast<int>(coeffs.front().rows());
  const int order = static_cast<int>(coeffs.size());
  for (const auto& a : coeffs)
    if (a.rows() != kc || a.cols() != kc)
      throw ShapeMismatch("coefficient matrices must be square, same size");

  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(kc * order, kc * order);
  for (int p = 0; p < order; ++p)
    comp.block(0, p * kc, kc, kc) = coeffs[p];
  for (int p = 1; p < order; ++p)
    comp.block(p * kc, (p - 1) * kc, kc, kc) =
        Eigen::MatrixXd::Identity(kc, kc);

  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Simulates `n_trials` independent realizations of the autoregression with
// unit-variance Gaussian innovations, zero initial history and `burn_in`
// discarded warm-up steps.  Innovations for (trial, channel) come from the
// stream derive_stream(seed, {kSignal, trial, channel}), so any subset of
// trials can be generated independently (and concurrently) with identical
// results.
inline TrialSet simulate_mvar(const std::vector<Eigen::MatrixXd>& coeffs,
                              int n_trials, int n_samples, int burn_in,
                              std::uint64_t seed) {
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (burn_in < 0) throw ConfigError("burn_in must be >= 0");

  const double radius = companion_spectral_radius(coeffs);
  if (!(radius < 1.0))
    throw NonStationaryModel("companion spectral radius " +
                             std::to_string(radius) + " is not < 1");

  const int kc = static_cast<int>(coeffs.front().rows());
  const int order = static_cast<int>(coeffs.size());
  const int total = burn_in + n_samples;

  TrialSet out;
  out.seed = seed;
  out.trials.reserve(n_trials);
  for (int m = 0; m < n_trials; ++m) {
    std::vector<rng::RandomStream> streams;
    streams.reserve(kc);
    for (int c = 0; c < kc; ++c)
      streams.emplace_back(rng::derive_stream(
          seed, {rng::kSignal, static_cast<std::uint64_t>(m),
                 static_cast<std::uint64_t>(c)}));

    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(kc, total);
    Eigen::VectorXd e(kc);
    for (int t = 0; t < total; ++t) {
      for (int c = 0; c < kc; ++c) e(c) = streams[c].normal();
      Eigen::VectorXd next = e;
      for (int p = 1; p <= order; ++p)
        if (t - p >= 0) next += coeffs[p - 1] * s.col(t - p);
      s.col(t) = next;
    }
    out.trials.push_back(s.rightCols(n_samples));
  }
  return out;
}

inline TrialSet generate_interacting(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::Interacting)
    throw ConfigError("config does not describe the interacting scenario");
  return simulate_mvar(interacting_generator(), cfg.n_trials, cfg.n_samples,
                       cfg.burn_in, cfg.seed);
}

namespace detail {

// Windowed-sinc low-pass FIR, order 64 (65 taps), Hamming window.
inline std::vector<double> lowpass_fir(double cutoff) {
  constexpr int kOrder = 64;
  std::vector<double> h(kOrder + 1);
  for (int i = 0; i <= kOrder; ++i) {
    const double centered = i - kOrder / 2.0;
    const double arg = 2.0 * std::numbers::pi * cutoff * centered;
    const double sinc =
        centered == 0.0 ? 2.0 * cutoff
                        : std::sin(arg) / (std::numbers::pi * centered);
    const double window =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / kOrder);
    h[i] = sinc * window;
  }
  return h;
}

// zero-mean, exactly unit population variance
inline void standardize_row(Eigen::MatrixXd& mat, int row) {
  const double mean = mat.row(row).mean();
  mat.row(row).array() -= mean;
  const double sd = std::sqrt(mat.row(row).squaredNorm() / mat.cols());
  if (sd < 1e-300)
    throw NumericalBreakdown("cannot standardize a constant channel");
  mat.row(row) /= sd;
}

}  // namespace detail

// Three mutually independent low-pass noise channels per trial (no directed
// interactions by construction).  Each channel filters its own white-noise
// stream with a windowed-sinc FIR at its configured cutoff; only fully
// overlapped filter outputs are kept, so there are no edge transients, and
// each channel is standardized to zero mean / unit variance.
inline TrialSet generate_noninteracting(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::NonInteracting)
    throw ConfigError("config does not describe the non-interacting scenario");

  const int kc = static_cast<int>(cfg.cutoffs.size());
  std::array<std::vector<double>, 3> firs;
  for (int c = 0; c < kc; ++c) firs[c] = detail::lowpass_fir(cfg.cutoffs[c]);
  const int taps = static_cast<int>(firs[0].size());

  TrialSet out;
  out.seed = cfg.seed;
  out.trials.reserve(cfg.n_trials);
  for (int m = 0; m < cfg.n_trials; ++m) {
    Eigen::MatrixXd s(kc, cfg.n_samples);
    for (int c = 0; c < kc; ++c) {
      rng::RandomStream rs(rng::derive_stream(
          cfg.seed, {rng::kSignal, static_cast<std::uint64_t>(m),
                     static_cast<std::uint64_t>(c)}));
      const int raw_len = cfg.burn_in + cfg.n_samples + taps - 1;
      std::vector<double> white(raw_len);
      for (double& w : white) w = rs.normal();

      // valid-mode convolution, then drop the burn-in prefix
      for (int t = 0; t < cfg.n_samples; ++t) {
        const int start = cfg.burn_in + t;
        double acc = 0.0;
        for (int i = 0; i < taps; ++i) acc += firs[c][i] * white[start + taps - 1 - i];
        s(c, t) = acc;
      }
      detail::standardize_row(s, c);
    }
    out.trials.push_back(std::move(s));
  }
  return out;
}

// Structured interference trials, unit variance per channel.
//  - Ar1Colored: x_t = pole * x_{t-1} + sqrt(1 - pole^2) * n_t
//  - OneOverF:   spectral synthesis with amplitude 1/sqrt(f), random phases
//  - FromFile:   timeseries CSV; must match the requested dimensions
inline TrialSet make_interference(const InterferenceSpec& spec, int n_trials,
                                  int n_channels, int n_samples,
                                  std::uint64_t seed) {
  if (n_trials < 1 || n_channels < 1 || n_samples < 2)
    throw ConfigError("interference dimensions must be positive");

  TrialSet out;
  out.seed = seed;

  if (spec.kind == InterferenceSpec::Kind::FromFile) {
    out = load_timeseries_csv(spec.path);
    if (out.n_trials() != n_trials || out.n_channels() != n_channels ||
        out.n_samples() != n_samples)
      throw DimensionMismatch(
          "interference file '" + spec.path + "' has shape (" +
          std::to_string(out.n_trials()) + ", " +
          std::to_string(out.n_channels()) + ", " +
          std::to_string(out.n_samples()) + "), expected (" +
          std::to_string(n_trials) + ", " + std::to_string(n_channels) + ", " +
          std::to_string(n_samples) + ")");
    if (!out.all_finite())
      throw FileFormatError("interference file '" + spec.path +
                            "' contains non-finite values");
    out.seed = seed;
    for (auto& trial : out.trials)
      for (int c = 0; c < n_channels; ++c) {
        try {
          detail::standardize_row(trial, c);
        } catch (const NumericalBreakdown&) {
          throw FileFormatError("interference file '" + spec.path +
                                "' has a constant channel");
        }
      }
    return out;
  }

  if (spec.kind == InterferenceSpec::Kind::Ar1Colored &&
      !(std::abs(spec.pole) < 1.0))
    throw ConfigError("AR(1) interference pole must satisfy |pole| < 1");

  out.trials.reserve(n_trials);
  Eigen::FFT<double> fft;
  for (int m = 0; m < n_trials; ++m) {
    Eigen::MatrixXd trial(n_channels, n_samples);
    for (int c = 0; c < n_channels; ++c) {
      rng::RandomStream rs(rng::derive_stream(
          seed, {rng::kInterference, static_cast<std::uint64_t>(m),
                 static_cast<std::uint64_t>(c)}));
      if (spec.kind == InterferenceSpec::Kind::Ar1Colored) {
        const double gain = std::sqrt(1.0 - spec.pole * spec.pole);
        double x = rs.normal();
        trial(c, 0) = x;
        for (int t = 1; t < n_samples; ++t) {
          x = spec.pole * x + gain * rs.normal();
          trial(c, t) = x;
        }
      } else {  // OneOverF
        const int n = n_samples;
        std::vector<std::complex<double>> spec_bins(
            n, std::complex<double>(0.0, 0.0));
        for (int f = 1; f <= n / 2; ++f) {
          const double amp = 1.0 / std::sqrt(static_cast<double>(f) / n);
          if (2 * f == n) {  // Nyquist bin must stay real
            spec_bins[f] = std::complex<double>(amp * rs.normal(), 0.0);
          } else {
            const double re = rs.normal(), im = rs.normal();
            spec_bins[f] =
                amp / std::sqrt(2.0) * std::complex<double>(re, im);
            spec_bins[n - f] = std::conj(spec_bins[f]);
          }
        }
        std::vector<double> time(n);
        fft.inv(time, spec_bins);
        for (int t = 0; t < n; ++t) trial(c, t) = time[t];
      }
      detail::standardize_row(trial, c);
    }
    out.trials.push_back(std::move(trial));
  }
  return out;
}

// Adds interference at a prescribed signal-to-interference ratio, defined as
// the RMS amplitude ratio over all channels and samples of a trial:
//   mixed_m = signal_m + alpha_m * interference_m,
//   alpha_m = sqrt(P(signal_m) / P(interference_m)) / sir.
// sir = +inf returns the signal unchanged.
inline TrialSet mix_at_sir(const TrialSet& signal, const TrialSet& interference,
                           double sir) {
  if (!(sir > 0.0)) throw ConfigError("sir must be positive (may be inf)");
  if (std::isinf(sir)) return signal;
  signal.require_same_shape(interference, "mix_at_sir");

  TrialSet out;
  out.seed = signal.seed;
  out.trials.reserve(signal.trials.size());
  for (int m = 0; m < signal.n_trials(); ++m) {
    const double p_sig = signal.trials[m].squaredNorm();
    const double p_int = interference.trials[m].squaredNorm();
    if (p_int <= 0.0)
      throw ConfigError("interference trial " + std::to_string(m) +
                        " has zero power");
    const double alpha = std::sqrt(p_sig / p_int) / sir;
    out.trials.push_back(signal.trials[m] + alpha * interference.trials[m]);
  }
  return out;
}

// Per-trial mixing gains (needed to build power-matched control conditions).
inline std::vector<double> mixing_gains(const TrialSet& signal,
                                        const TrialSet& interference,
                                        double sir) {
  if (!(sir > 0.0)) throw ConfigError("sir must be positive (may be inf)");
  signal.require_same_shape(interference, "mixing_gains");
  std::vector<double> gains(signal.n_trials(), 0.0);
  if (std::isinf(sir)) return gains;
  for (int m = 0; m < signal.n_trials(); ++m) {
    const double p_sig = signal.trials[m].squaredNorm();
    const double p_int = interference.trials[m].squaredNorm();
    if (p_int <= 0.0)
      throw ConfigError("interference trial " + std::to_string(m) +
                        " has zero power");
    gains[m] = std::sqrt(p_sig / p_int) / sir;
  }
  return gains;
}

}  // namespace mvarpdc
