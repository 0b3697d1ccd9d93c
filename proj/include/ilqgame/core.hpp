#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ilqgame {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using PlayerIndex = std::size_t;

/// Argument outside the domain of a lookup (track arc length, tables, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The curvilinear frame is singular at the evaluated point (1 - n*kappa <= 0).
/// Carries the stage index when raised from a rollout or linearization.
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what, long stage = -1)
      : std::runtime_error(what), stage_(stage) {}

  long stage() const noexcept { return stage_; }

 private:
  long stage_;
};

/// A linear system inside an LQ backward pass is singular or too badly
/// conditioned to trust.
class SolverSingularityError : public std::runtime_error {
 public:
  SolverSingularityError(const std::string& what, long stage, double condition)
      : std::runtime_error(what), stage_(stage), condition_(condition) {}

  long stage() const noexcept { return stage_; }
  double condition() const noexcept { return condition_; }

 private:
  long stage_;
  double condition_;
};

/// Condition numbers above this are reported as singular.
inline constexpr double kMaxConditionNumber = 1e12;

/// Max-norm over a pair of equally long state sequences.
inline double max_abs_difference(const std::vector<Vector>& a,
                                 const std::vector<Vector>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("max_abs_difference: length mismatch");
  }
  double out = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() == 0) continue;
    out = std::max(out, (a[k] - b[k]).cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace ilqgame
