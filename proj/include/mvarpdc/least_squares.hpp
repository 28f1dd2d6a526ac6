#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "mvarpdc/errors.hpp"
#include "mvarpdc/mvar_model.hpp"
#include "mvarpdc/yule_walker.hpp"

namespace mvarpdc {

// Ordinary least squares, solved channel by channel with a column-pivoting
// QR factorization.  The solve is refused outright when the normal equations
// are numerically untrustworthy: cond(Phi^T Phi) = (s_max / s_min)^2 checked
// against 1/sqrt(machine epsilon).
inline MvarModel estimate_least_squares(const YuleWalkerSystem& sys) {
  const double limit = 1.0 / std::sqrt(std::numeric_limits<double>::epsilon());

  Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.phi);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  const double cond =
      smin > 0.0 ? (smax / smin) * (smax / smin)
                 : std::numeric_limits<double>::infinity();
  if (!(cond < limit))
    throw IllConditioned("normal equations condition estimate " +
                             std::to_string(cond) + " exceeds limit",
                         cond);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.phi);
  MvarModel model =
      MvarModel::zeros(sys.n_channels, sys.order, EstimationMethod::LeastSquares);
  for (int k = 0; k < sys.n_channels; ++k) {
    Eigen::VectorXd x = qr.solve(sys.targets.col(k));
    if (!x.allFinite())
      throw NumericalBreakdown("least-squares solution is not finite");
    model.set_stacked_row(k, x);
  }
  return model;
}

}  // namespace mvarpdc
