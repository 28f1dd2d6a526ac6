#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "mvarpdc/errors.hpp"
#include "mvarpdc/mvar_model.hpp"

namespace mvarpdc {

// Frequency-domain coefficient deviation matrix sampled on a uniform grid of
// normalized frequencies f_b = 0.5 * b / (n_freqs - 1), b = 0..n_freqs-1:
//   abar[b] = I - sum_p A(p) exp(-i 2 pi f_b p)
struct SpectralCoeffMatrix {
  std::vector<Eigen::MatrixXcd> abar;
  std::vector<double> freqs;

  int n_freqs() const { return static_cast<int>(abar.size()); }
  int n_channels() const {
    return abar.empty() ? 0 : static_cast<int>(abar.front().rows());
  }
};

inline SpectralCoeffMatrix spectral_transform(const MvarModel& model,
                                              int n_freqs) {
  if (n_freqs < 2) throw ConfigError("n_freqs must be >= 2");
  if (model.order() < 1) throw ShapeMismatch("model has no coefficients");
  const int kc = model.n_channels();

  SpectralCoeffMatrix out;
  out.abar.reserve(n_freqs);
  out.freqs.reserve(n_freqs);
  for (int b = 0; b < n_freqs; ++b) {
    const double f = 0.5 * b / (n_freqs - 1);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(kc, kc);
    for (int p = 1; p <= model.order(); ++p) {
      const std::complex<double> rot =
          std::polar(1.0, -2.0 * std::numbers::pi * f * p);
      a -= model.coeffs[p - 1] * rot;
    }
    out.abar.push_back(std::move(a));
    out.freqs.push_back(f);
  }
  return out;
}

// A source column whose norm fell below 1e-14; its outgoing-direction values
// are reported as zero instead of dividing by (almost) nothing.
struct DegenerateColumn {
  int source = 0;
  int bin = 0;
};

// Partial directed coherence.  psi[b](j, k) quantifies direction k -> j at
// frequency freqs[b]:
//   psi(j, k) = |abar(j, k)| / ||abar column k||
// so every column satisfies sum_j psi(j, k)^2 = 1.
struct PdcSpectrum {
  std::vector<Eigen::MatrixXd> psi;
  std::vector<double> freqs;
  bool averaged = false;  // true when built from several trials' transforms
  std::vector<DegenerateColumn> degenerate;

  int n_freqs() const { return static_cast<int>(psi.size()); }
  int n_channels() const {
    return psi.empty() ? 0 : static_cast<int>(psi.front().rows());
  }
  // Direction source -> target at a frequency bin.
  double value(int source, int target, int bin) const {
    return psi[bin](target, source);
  }
};

namespace detail {

inline PdcSpectrum pdc_normalize(std::vector<Eigen::MatrixXcd>&& abar,
                                 std::vector<double>&& freqs, bool averaged) {
  PdcSpectrum out;
  out.freqs = std::move(freqs);
  out.averaged = averaged;
  const int nb = static_cast<int>(abar.size());
  out.psi.reserve(nb);
  for (int b = 0; b < nb; ++b) {
    const int kc = static_cast<int>(abar[b].rows());
    Eigen::MatrixXd psi(kc, kc);
    for (int k = 0; k < kc; ++k) {
      const double norm = abar[b].col(k).norm();
      if (norm < 1e-14) {
        psi.col(k).setZero();
        out.degenerate.push_back(DegenerateColumn{k, b});
      } else {
        psi.col(k) = abar[b].col(k).cwiseAbs() / norm;
      }
    }
    out.psi.push_back(std::move(psi));
  }
  return out;
}

}  // namespace detail

inline PdcSpectrum pdc_single(const SpectralCoeffMatrix& sc) {
  auto abar = sc.abar;
  auto freqs = sc.freqs;
  return detail::pdc_normalize(std::move(abar), std::move(freqs), false);
}

// Trial-averaged variant: the complex coefficient transforms are averaged
// element-wise across trials first, and the normalization is applied to the
// averaged matrix.
inline PdcSpectrum pdc_trial_averaged(
    const std::vector<SpectralCoeffMatrix>& transforms) {
  if (transforms.empty())
    throw ShapeMismatch("cannot average zero spectral transforms");
  const auto& first = transforms.front();
  for (const auto& t : transforms)
    if (t.n_freqs() != first.n_freqs() || t.n_channels() != first.n_channels())
      throw ShapeMismatch("spectral transforms differ in shape");

  const int nb = first.n_freqs();
  const int kc = first.n_channels();
  std::vector<Eigen::MatrixXcd> mean(nb, Eigen::MatrixXcd::Zero(kc, kc));
  for (const auto& t : transforms)
    for (int b = 0; b < nb; ++b) mean[b] += t.abar[b];
  for (int b = 0; b < nb; ++b) mean[b] /= static_cast<double>(transforms.size());

  auto freqs = first.freqs;
  return detail::pdc_normalize(std::move(mean), std::move(freqs), true);
}

// Single-model convenience path.
inline PdcSpectrum pdc_of_model(const MvarModel& model, int n_freqs) {
  return pdc_single(spectral_transform(model, n_freqs));
}

}  // namespace mvarpdc
