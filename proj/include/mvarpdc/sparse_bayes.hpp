#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mvarpdc/errors.hpp"
#include "mvarpdc/mvar_model.hpp"
#include "mvarpdc/yule_walker.hpp"

namespace mvarpdc {

enum class LambdaInit { InverseVariance, Unit };
enum class LambdaStructure { PerSample, Isotropic };

struct EmConfig {
  int max_iters = 500;
  double rel_tol = 1e-6;
  // A coefficient whose precision hyperparameter exceeds this is pruned:
  // removed from the active set and fixed at exactly zero.
  double prune_threshold = 1e12;
  double nu_init = 1.0;
  LambdaInit lambda_init = LambdaInit::InverseVariance;
  LambdaStructure lambda_structure = LambdaStructure::PerSample;

  void validate() const {
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
    if (!(prune_threshold > 0.0))
      throw ConfigError("prune_threshold must be positive");
    if (!(nu_init > 0.0)) throw ConfigError("nu_init must be positive");
  }
};

namespace detail {

// Evidence-maximizing EM for one regression channel y ~ Phi x with an
// independent zero-mean Gaussian prior of precision nu_j on each coefficient
// and Gaussian noise of precision Lambda (diagonal, either one entry per
// sample or a single shared scalar).
//
// Per iteration:
//   E-step   Gamma = Phi' Lambda Phi + diag(nu)   (posterior precision)
//            x     = Gamma^{-1} Phi' Lambda y
//   M-step   nu_j     <- 1 / (x_j^2 + [Gamma^{-1}]_jj)
//            lambda_t <- 1 / (r_t^2 + [Phi Gamma^{-1} Phi']_tt),  r = y - Phi x
//            (isotropic variant uses the mean of the per-sample terms)
//
// Convergence is declared on the relative change of x between consecutive
// E-steps; the M-step is skipped once the stop condition is met, so the
// returned x is always a posterior mean under the last accepted
// hyperparameters.  Columns whose nu_j crosses prune_threshold are dropped
// from the active set and their coefficients stay exactly zero.
struct ChannelFit {
  Eigen::VectorXd x;
  ChannelDiagnostics diag;
};

inline ChannelFit fit_channel_em(const Eigen::MatrixXd& phi,
                                 const Eigen::VectorXd& y,
                                 const EmConfig& cfg) {
  const int n = static_cast<int>(phi.rows());
  const int m = static_cast<int>(phi.cols());
  constexpr double tiny = 1e-300;

  std::vector<int> active(m);
  for (int j = 0; j < m; ++j) active[j] = j;
  Eigen::VectorXd nu = Eigen::VectorXd::Constant(m, cfg.nu_init);

  double lambda_scalar = 1.0;
  Eigen::VectorXd lambda_vec;
  if (cfg.lambda_init == LambdaInit::InverseVariance) {
    const double mean = y.mean();
    const double var = (y.array() - mean).square().sum() / n;
    lambda_scalar = 1.0 / std::max(var, tiny);
  }
  if (cfg.lambda_structure == LambdaStructure::PerSample)
    lambda_vec = Eigen::VectorXd::Constant(n, lambda_scalar);

  ChannelFit fit;
  fit.x = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd x_prev = Eigen::VectorXd::Zero(m);

  Eigen::MatrixXd phi_a = phi;
  auto drop_columns = [&](const std::vector<int>& keep) {
    Eigen::MatrixXd next(n, keep.size());
    Eigen::VectorXd nu_next(keep.size());
    std::vector<int> active_next(keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c) {
      next.col(c) = phi_a.col(keep[c]);
      nu_next(c) = nu(keep[c]);
      active_next[c] = active[keep[c]];
    }
    phi_a.swap(next);
    nu.swap(nu_next);
    active.swap(active_next);
  };

  for (int it = 1; it <= cfg.max_iters; ++it) {
    const int ma = static_cast<int>(active.size());
    Eigen::VectorXd x_a;
    Eigen::MatrixXd sigma;           // posterior covariance on the active set
    Eigen::MatrixXd weighted;        // Phi_a' Lambda

    if (ma > 0) {
      if (cfg.lambda_structure == LambdaStructure::PerSample)
        weighted = phi_a.transpose() * lambda_vec.asDiagonal();
      else
        weighted = phi_a.transpose() * lambda_scalar;
      Eigen::MatrixXd gamma = weighted * phi_a;
      gamma.diagonal() += nu;

      Eigen::LDLT<Eigen::MatrixXd> ldlt(gamma);
      if (ldlt.info() != Eigen::Success ||
          (ldlt.vectorD().array() <= 0.0).any())
        throw NumericalBreakdown(
            "posterior precision lost positive definiteness");
      x_a = ldlt.solve(weighted * y);
      if (!x_a.allFinite())
        throw NumericalBreakdown("posterior mean is not finite");
      sigma = ldlt.solve(Eigen::MatrixXd::Identity(ma, ma));
    } else {
      x_a.resize(0);
      sigma.resize(0, 0);
    }

    Eigen::VectorXd x_full = Eigen::VectorXd::Zero(m);
    for (int c = 0; c < ma; ++c) x_full(active[c]) = x_a(c);

    const double delta = (x_full - x_prev).norm();
    const double scale = x_full.norm();
    const double rel = delta == 0.0 ? 0.0 : delta / std::max(scale, tiny);
    x_prev = x_full;

    const bool done = rel < cfg.rel_tol || it == cfg.max_iters || ma == 0;
    if (done) {
      fit.x = x_full;
      fit.diag.iterations = it;
      fit.diag.final_rel_change = rel;
      fit.diag.pruned_count = m - ma;
      fit.diag.converged = rel < cfg.rel_tol;
      return fit;
    }

    // M-step
    Eigen::VectorXd r_xx = x_a.array().square().matrix() + sigma.diagonal();
    for (int c = 0; c < ma; ++c)
      nu(c) = 1.0 / std::max(r_xx(c), tiny);

    const Eigen::VectorXd resid = y - phi_a * x_a;
    const Eigen::VectorXd proj =
        (phi_a * sigma).cwiseProduct(phi_a).rowwise().sum();
    if (cfg.lambda_structure == LambdaStructure::PerSample) {
      lambda_vec =
          (resid.array().square() + proj.array()).max(tiny).inverse().matrix();
    } else {
      const double mean_inv =
          (resid.array().square() + proj.array()).mean();
      lambda_scalar = 1.0 / std::max(mean_inv, tiny);
    }

    std::vector<int> keep;
    keep.reserve(ma);
    for (int c = 0; c < ma; ++c)
      if (nu(c) <= cfg.prune_threshold) keep.push_back(c);
    if (static_cast<int>(keep.size()) < ma) drop_columns(keep);
  }

  // max_iters >= 1 guarantees the loop returned already.
  throw NumericalBreakdown("unreachable: EM loop exited without returning");
}

}  // namespace detail

// Sparse Bayesian estimate of the full model: one EM run per channel.
inline MvarModel estimate_sparse_bayes(const YuleWalkerSystem& sys,
                                       const EmConfig& cfg = EmConfig{}) {
  cfg.validate();
  // A non-finite regressor or target corrupts the variance initialization and
  // can survive the factorization (a NaN pivot solves to a zeroed component),
  // so refuse the inputs up front instead of returning a silent zero fit.
  if (!sys.phi.allFinite() || !sys.targets.allFinite())
    throw NumericalBreakdown("regression inputs contain non-finite values");
  MvarModel model =
      MvarModel::zeros(sys.n_channels, sys.order, EstimationMethod::SparseBayes);
  model.diagnostics.assign(sys.n_channels, ChannelDiagnostics{});
  for (int k = 0; k < sys.n_channels; ++k) {
    detail::ChannelFit fit =
        detail::fit_channel_em(sys.phi, sys.targets.col(k), cfg);
    model.set_stacked_row(k, fit.x);
    model.diagnostics[k] = fit.diag;
  }
  return model;
}

}  // namespace mvarpdc
