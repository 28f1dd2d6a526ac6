#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mvarpdc/errors.hpp"

namespace mvarpdc {

// A block of multi-channel trials with homogeneous shape.
// trials[m] is channels x samples.
struct TrialSet {
  std::vector<Eigen::MatrixXd> trials;
  std::uint64_t seed = 0;

  int n_trials() const { return static_cast<int>(trials.size()); }
  int n_channels() const {
    return trials.empty() ? 0 : static_cast<int>(trials.front().rows());
  }
  int n_samples() const {
    return trials.empty() ? 0 : static_cast<int>(trials.front().cols());
  }

  bool all_finite() const {
    for (const auto& t : trials)
      if (!t.allFinite()) return false;
    return true;
  }

  void require_same_shape(const TrialSet& other, const char* what) const {
    if (n_trials() != other.n_trials() || n_channels() != other.n_channels() ||
        n_samples() != other.n_samples())
      throw DimensionMismatch(std::string(what) + ": trial sets differ in shape");
  }
};

enum class Scenario { Interacting, NonInteracting };

// Structured interference added to the clean trials.
struct InterferenceSpec {
  enum class Kind { Ar1Colored, OneOverF, FromFile };
  Kind kind = Kind::Ar1Colored;
  double pole = 0.95;  // AR(1) coefficient for Ar1Colored
  std::string path;    // timeseries CSV for FromFile
};

struct ScenarioConfig {
  Scenario scenario = Scenario::Interacting;
  int n_trials = 40;
  int n_samples = 600;
  // Signal-to-interference ratio as an RMS amplitude ratio over all channels
  // and samples of a trial; +inf means no interference is added.
  double sir = std::numeric_limits<double>::infinity();
  InterferenceSpec interference;
  int burn_in = 500;
  // Low-pass cutoffs (normalized, cycles/sample) for the three independent
  // channels of the non-interacting scenario.
  std::array<double, 3> cutoffs{0.3, 0.2, 0.15};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
    if (!(sir > 0.0)) throw ConfigError("sir must be positive (may be inf)");
    for (double c : cutoffs)
      if (!(c > 0.0) || !(c < 0.5))
        throw ConfigError("cutoffs must lie in (0, 0.5)");
    if (interference.kind == InterferenceSpec::Kind::Ar1Colored &&
        !(std::abs(interference.pole) < 1.0))
      throw ConfigError("AR(1) interference pole must satisfy |pole| < 1");
    if (interference.kind == InterferenceSpec::Kind::FromFile &&
        interference.path.empty())
      throw ConfigError("FromFile interference needs a path");
  }
};

}  // namespace mvarpdc
