#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mvarpdc/errors.hpp"

namespace mvarpdc {

enum class EstimationMethod { LeastSquares, SparseBayes };

// Per-channel fit diagnostics; populated by the iterative estimator only.
struct ChannelDiagnostics {
  int iterations = 0;
  double final_rel_change = 0.0;
  int pruned_count = 0;
  bool converged = true;
};

// Fitted autoregression.  coeffs[p-1](j, k) is the weight of channel k at
// lag p in the prediction of channel j (direction k -> j).
struct MvarModel {
  std::vector<Eigen::MatrixXd> coeffs;
  EstimationMethod method = EstimationMethod::LeastSquares;
  std::vector<ChannelDiagnostics> diagnostics;  // one per channel, or empty

  int order() const { return static_cast<int>(coeffs.size()); }
  int n_channels() const {
    return coeffs.empty() ? 0 : static_cast<int>(coeffs.front().rows());
  }

  static MvarModel zeros(int k_channels, int order, EstimationMethod m) {
    MvarModel model;
    model.method = m;
    model.coeffs.assign(order, Eigen::MatrixXd::Zero(k_channels, k_channels));
    return model;
  }

  // Channel k's coefficients in regression column order:
  // [A_k1(1)..A_kK(1), ..., A_k1(P)..A_kK(P)].
  Eigen::VectorXd stacked_row(int k) const {
    const int kc = n_channels();
    Eigen::VectorXd x(order() * kc);
    for (int p = 0; p < order(); ++p)
      for (int m = 0; m < kc; ++m) x(p * kc + m) = coeffs[p](k, m);
    return x;
  }

  void set_stacked_row(int k, const Eigen::VectorXd& x) {
    const int kc = n_channels();
    if (x.size() != static_cast<Eigen::Index>(order()) * kc)
      throw ShapeMismatch("stacked coefficient vector has wrong length");
    for (int p = 0; p < order(); ++p)
      for (int m = 0; m < kc; ++m) coeffs[p](k, m) = x(p * kc + m);
  }

  bool same_shape(const MvarModel& other) const {
    return order() == other.order() && n_channels() == other.n_channels();
  }
};

// Element-wise mean of coefficient matrices across models (used for the
// trial-averaged model and for permutation resamples).  Diagnostics are
// aggregated by averaging.
inline MvarModel average_models(const std::vector<MvarModel>& models) {
  if (models.empty()) throw ShapeMismatch("cannot average zero models");
  const MvarModel& first = models.front();
  for (const auto& m : models) {
    if (!m.same_shape(first))
      throw ShapeMismatch("models differ in order or channel count");
    if (m.method != first.method)
      throw ShapeMismatch("models were fitted with different estimators");
  }

  MvarModel avg = MvarModel::zeros(first.n_channels(), first.order(), first.method);
  for (const auto& m : models)
    for (int p = 0; p < avg.order(); ++p) avg.coeffs[p] += m.coeffs[p];
  for (int p = 0; p < avg.order(); ++p)
    avg.coeffs[p] /= static_cast<double>(models.size());

  const bool have_diag = !first.diagnostics.empty();
  if (have_diag) {
    const int kc = first.n_channels();
    avg.diagnostics.assign(kc, ChannelDiagnostics{});
    for (int k = 0; k < kc; ++k) {
      double iters = 0.0, rel = 0.0, pruned = 0.0;
      bool all_converged = true;
      for (const auto& m : models) {
        if (static_cast<int>(m.diagnostics.size()) != kc)
          throw ShapeMismatch("model diagnostics have inconsistent size");
        iters += m.diagnostics[k].iterations;
        rel += m.diagnostics[k].final_rel_change;
        pruned += m.diagnostics[k].pruned_count;
        all_converged = all_converged && m.diagnostics[k].converged;
      }
      const double n = static_cast<double>(models.size());
      avg.diagnostics[k].iterations = static_cast<int>(std::lround(iters / n));
      avg.diagnostics[k].final_rel_change = rel / n;
      avg.diagnostics[k].pruned_count = static_cast<int>(std::lround(pruned / n));
      avg.diagnostics[k].converged = all_converged;
    }
  }
  return avg;
}

}  // namespace mvarpdc
