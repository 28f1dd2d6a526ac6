#pragma once

#include <Eigen/Dense>

#include "mvarpdc/errors.hpp"

namespace mvarpdc {

// Regression form of an order-P autoregression on K channels:
// for t = P..N_T-1, row i = t-P of `phi` holds the lagged samples
//   phi(i, (p-1)*K + m) = series(m, t - p),  p = 1..P, m = 0..K-1,
// and targets(i, k) = series(k, t).  Channel k's coefficient vector in this
// column order is [A_k1(1)..A_kK(1), ..., A_k1(P)..A_kK(P)].
struct YuleWalkerSystem {
  Eigen::MatrixXd phi;      // (N_T - P) x (P*K)
  Eigen::MatrixXd targets;  // (N_T - P) x K
  int order = 0;
  int n_channels = 0;

  int n_equations() const { return static_cast<int>(phi.rows()); }
  int n_unknowns() const { return static_cast<int>(phi.cols()); }
};

inline YuleWalkerSystem build_yule_walker(const Eigen::MatrixXd& series,
                                          int order) {
  const int k_channels = static_cast<int>(series.rows());
  const int n_samples = static_cast<int>(series.cols());
  if (order < 1) throw ConfigError("model order must be >= 1");
  if (k_channels < 1) throw ConfigError("series needs at least one channel");

  const int rows = n_samples - order;
  const int cols = order * k_channels;
  if (rows < cols)
    throw InsufficientSamples(
        "only " + std::to_string(rows > 0 ? rows : 0) +
        " usable samples for " + std::to_string(cols) + " unknowns");

  YuleWalkerSystem sys;
  sys.order = order;
  sys.n_channels = k_channels;
  sys.phi.resize(rows, cols);
  sys.targets.resize(rows, k_channels);
  for (int i = 0; i < rows; ++i) {
    const int t = order + i;
    for (int p = 1; p <= order; ++p)
      for (int m = 0; m < k_channels; ++m)
        sys.phi(i, (p - 1) * k_channels + m) = series(m, t - p);
    for (int k = 0; k < k_channels; ++k) sys.targets(i, k) = series(k, t);
  }
  return sys;
}

}  // namespace mvarpdc
