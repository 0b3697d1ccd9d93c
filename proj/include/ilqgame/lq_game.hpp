#pragma once

// Stage-wise LQ game in deviation coordinates
//
//   dx_{k+1} = A_k dx_k + sum_j B_k^j du_k^j
//   J^i = sum_k [ 1/2 dx'Q dx + q'dx + sum_j (1/2 du_j'R^{ij} du_j + r^{ij}'du_j) ]
//         + 1/2 dx_K'Q_K dx_K + q_K'dx_K
//
// and its feedback and open-loop Nash solutions. Strategies follow the
// convention du_k^i = -K_k^i dx_k - k_k^i.

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "ilqgame/core.hpp"

namespace ilqgame {

struct LinearDynamicsStage {
  Matrix A;
  std::vector<Matrix> B;  // one per player
};

/// Quadratic model of one player's cost at one stage. R and r are indexed by
/// the input owner j; a zero-size entry means "identically zero". Terminal
/// stages leave R and r empty.
struct QuadraticCostStage {
  Matrix Q;
  Vector q;
  std::vector<Matrix> R;
  std::vector<Vector> r;
};

struct LqApproximation {
  std::vector<LinearDynamicsStage> dynamics;           // K stages
  std::vector<std::vector<QuadraticCostStage>> costs;  // K + 1 stages x N

  std::size_t horizon() const noexcept { return dynamics.size(); }
  std::size_t num_players() const noexcept {
    return costs.empty() ? 0 : costs.front().size();
  }
  Eigen::Index state_dim() const {
    return costs.empty() ? 0 : costs.front().front().Q.rows();
  }
  Eigen::Index input_dim(PlayerIndex i) const {
    return dynamics.empty() ? 0 : dynamics.front().B[i].cols();
  }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const {
    const std::size_t K = horizon();
    if (costs.size() != K + 1) {
      throw std::invalid_argument("LqApproximation: need K + 1 cost stages");
    }
    const std::size_t N = num_players();
    if (N == 0) throw std::invalid_argument("LqApproximation: no players");
    const auto n = state_dim();
    for (std::size_t k = 0; k <= K; ++k) {
      if (costs[k].size() != N) {
        throw std::invalid_argument("LqApproximation: player count varies");
      }
      for (std::size_t i = 0; i < N; ++i) {
        const auto& c = costs[k][i];
        if (c.Q.rows() != n || c.Q.cols() != n || c.q.size() != n) {
          throw std::invalid_argument("LqApproximation: Q/q dimension mismatch");
        }
        if (k < K && (c.R.size() != N || c.r.size() != N)) {
          throw std::invalid_argument("LqApproximation: R/r need N entries");
        }
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      const auto& d = dynamics[k];
      if (d.A.rows() != n || d.A.cols() != n || d.B.size() != N) {
        throw std::invalid_argument("LqApproximation: A/B dimension mismatch");
      }
      for (std::size_t j = 0; j < N; ++j) {
        if (d.B[j].rows() != n || d.B[j].cols() != input_dim(j)) {
          throw std::invalid_argument("LqApproximation: B dimension mismatch");
        }
        for (std::size_t i = 0; i < N; ++i) {
          const auto& R = costs[k][i].R[j];
          if (R.size() != 0 &&
              (R.rows() != input_dim(j) || R.cols() != input_dim(j))) {
            throw std::invalid_argument("LqApproximation: R dimension mismatch");
          }
        }
      }
    }
  }
};

/// du = -gain * dx - offset
struct AffineLaw {
  Matrix gain;
  Vector offset;
};

enum class EquilibriumType { kFeedback, kOpenLoop };

struct StrategySet {
  EquilibriumType type = EquilibriumType::kFeedback;
  std::vector<std::vector<AffineLaw>> laws;  // [stage][player]

  std::size_t horizon() const noexcept { return laws.size(); }
  std::size_t num_players() const noexcept {
    return laws.empty() ? 0 : laws.front().size();
  }
  const AffineLaw& operator()(std::size_t k, PlayerIndex i) const {
    return laws[k][i];
  }
  AffineLaw& operator()(std::size_t k, PlayerIndex i) { return laws[k][i]; }
};

/// Value-function coefficients produced by a backward pass, [stage][player].
/// For the feedback solver these are (P, p); for the open-loop solver (M, m).
struct ValueRecursion {
  std::vector<std::vector<Matrix>> P;
  std::vector<std::vector<Vector>> p;
};

namespace detail {

inline bool is_zero_block(const Matrix& m) { return m.size() == 0; }
inline bool is_zero_block(const Vector& v) { return v.size() == 0; }

template <class Lu>
void check_condition(const Lu& lu, std::size_t stage, const char* what) {
  const double rcond = lu.rcond();
  if (!(rcond * kMaxConditionNumber > 1.0)) {
    const double cond = rcond > 0.0 ? 1.0 / rcond
                                    : std::numeric_limits<double>::infinity();
    std::ostringstream msg;
    msg << what << " is singular at stage " << stage
        << " (condition estimate " << cond << ")";
    throw SolverSingularityError(msg.str(), static_cast<long>(stage), cond);
  }
}

inline std::vector<Eigen::Index> input_offsets(const LqApproximation& lq) {
  std::vector<Eigen::Index> offsets(lq.num_players() + 1, 0);
  for (std::size_t j = 0; j < lq.num_players(); ++j) {
    offsets[j + 1] = offsets[j] + lq.input_dim(j);
  }
  return offsets;
}

}  // namespace detail

/// Feedback Nash equilibrium of the LQ game. At every stage the coupled
/// first-order conditions of all players are stacked into one dense system
///
///   (R^{ii} + B^i'P^i B^i) K^i + B^i'P^i sum_{j!=i} B^j K^j = B^i'P^i A
///   (R^{ii} + B^i'P^i B^i) k^i + B^i'P^i sum_{j!=i} B^j k^j = B^i'p^i + r^{ii}
///
/// and solved by LU; (P, p) then follow the coupled Riccati update.
inline StrategySet solve_feedback_lq(const LqApproximation& lq,
                                     ValueRecursion* values = nullptr) {
  lq.validate();
  const std::size_t K = lq.horizon();
  const std::size_t N = lq.num_players();
  const Eigen::Index n = lq.state_dim();
  const auto offsets = detail::input_offsets(lq);
  const Eigen::Index total_m = offsets.back();

  StrategySet out;
  out.type = EquilibriumType::kFeedback;
  out.laws.assign(K, std::vector<AffineLaw>(N));

  std::vector<Matrix> P(N);
  std::vector<Vector> p(N);
  for (std::size_t i = 0; i < N; ++i) {
    P[i] = lq.costs[K][i].Q;
    p[i] = lq.costs[K][i].q;
  }
  if (values) {
    values->P.assign(K + 1, std::vector<Matrix>(N));
    values->p.assign(K + 1, std::vector<Vector>(N));
    values->P[K] = P;
    values->p[K] = p;
  }

  Matrix S(total_m, total_m);
  Matrix Y(total_m, n + 1);
  for (std::size_t kk = K; kk-- > 0;) {
    const auto& dyn = lq.dynamics[kk];
    const auto& cost = lq.costs[kk];

    for (std::size_t i = 0; i < N; ++i) {
      const auto oi = offsets[i];
      const auto mi = lq.input_dim(i);
      const Matrix BiP = dyn.B[i].transpose() * P[i];
      for (std::size_t j = 0; j < N; ++j) {
        S.block(oi, offsets[j], mi, lq.input_dim(j)) = BiP * dyn.B[j];
      }
      S.block(oi, oi, mi, mi) += cost[i].R[i];
      Y.block(oi, 0, mi, n) = BiP * dyn.A;
      Y.col(n).segment(oi, mi) = dyn.B[i].transpose() * p[i];
      if (!detail::is_zero_block(cost[i].r[i])) {
        Y.col(n).segment(oi, mi) += cost[i].r[i];
      }
    }

    const Eigen::PartialPivLU<Matrix> lu(S);
    detail::check_condition(lu, kk, "coupled feedback system");
    const Matrix X = lu.solve(Y);

    Matrix F = dyn.A;
    Vector beta = Vector::Zero(n);
    for (std::size_t j = 0; j < N; ++j) {
      auto& law = out.laws[kk][j];
      law.gain = X.block(offsets[j], 0, lq.input_dim(j), n);
      law.offset = X.col(n).segment(offsets[j], lq.input_dim(j));
      F.noalias() -= dyn.B[j] * law.gain;
      beta.noalias() -= dyn.B[j] * law.offset;
    }

    for (std::size_t i = 0; i < N; ++i) {
      Matrix P_new = cost[i].Q + F.transpose() * P[i] * F;
      Vector p_new = cost[i].q + F.transpose() * (p[i] + P[i] * beta);
      for (std::size_t j = 0; j < N; ++j) {
        const auto& law = out.laws[kk][j];
        if (!detail::is_zero_block(cost[i].R[j])) {
          P_new.noalias() += law.gain.transpose() * cost[i].R[j] * law.gain;
          p_new.noalias() += law.gain.transpose() * cost[i].R[j] * law.offset;
        }
        if (!detail::is_zero_block(cost[i].r[j])) {
          p_new.noalias() -= law.gain.transpose() * cost[i].r[j];
        }
      }
      P[i] = 0.5 * (P_new + P_new.transpose());
      p[i] = std::move(p_new);
    }
    if (values) {
      values->P[kk] = P;
      values->p[kk] = p;
    }
  }
  return out;
}

/// Open-loop Nash equilibrium of the LQ game for a given initial deviation.
/// Backward pass over (Lambda, M, m), then a forward sweep of the deviation
/// state; each player's input is du_k^i = -k_k^i with
///
///   k_k^i = (R^{ii})^{-1} [ B^i'(M_{k+1}^i dx_{k+1} + m_{k+1}^i) + r^{ii} ].
///
/// All gains of the result are zero. `deviations`, if given, receives
/// dx_0..dx_K.
inline StrategySet solve_openloop_lq(const LqApproximation& lq,
                                     const Vector& dx0,
                                     ValueRecursion* values = nullptr,
                                     std::vector<Vector>* deviations = nullptr) {
  lq.validate();
  const std::size_t K = lq.horizon();
  const std::size_t N = lq.num_players();
  const Eigen::Index n = lq.state_dim();
  if (dx0.size() != n) {
    throw std::invalid_argument("solve_openloop_lq: dx0 dimension mismatch");
  }

  std::vector<std::vector<Matrix>> M(K + 1, std::vector<Matrix>(N));
  std::vector<std::vector<Vector>> m(K + 1, std::vector<Vector>(N));
  for (std::size_t i = 0; i < N; ++i) {
    M[K][i] = lq.costs[K][i].Q;
    m[K][i] = lq.costs[K][i].q;
  }

  // Per stage: Cholesky of R^{jj}, LU of Lambda, and the drift term
  // -sum_j B^j (R^{jj})^{-1} (B^j'm^j + r^{jj}).
  std::vector<std::vector<Eigen::LLT<Matrix>>> chol_R(K);
  std::vector<Eigen::PartialPivLU<Matrix>> lu_lambda(K);
  std::vector<Vector> drift(K);

  for (std::size_t kk = K; kk-- > 0;) {
    const auto& dyn = lq.dynamics[kk];
    const auto& cost = lq.costs[kk];
    Matrix lambda = Matrix::Identity(n, n);
    drift[kk] = Vector::Zero(n);
    chol_R[kk].resize(N);
    for (std::size_t j = 0; j < N; ++j) {
      chol_R[kk][j].compute(cost[j].R[j]);
      if (chol_R[kk][j].info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "R^{jj} of player " << j << " is not positive definite at stage "
            << kk;
        throw SolverSingularityError(msg.str(), static_cast<long>(kk),
                                     std::numeric_limits<double>::infinity());
      }
      const Matrix warped_B = chol_R[kk][j].solve(dyn.B[j].transpose());
      lambda.noalias() += dyn.B[j] * warped_B * M[kk + 1][j];
      Vector rhs = dyn.B[j].transpose() * m[kk + 1][j];
      if (!detail::is_zero_block(cost[j].r[j])) rhs += cost[j].r[j];
      drift[kk].noalias() -= dyn.B[j] * chol_R[kk][j].solve(rhs);
    }
    lu_lambda[kk].compute(lambda);
    detail::check_condition(lu_lambda[kk], kk, "open-loop Lambda");

    const Matrix lambda_inv_A = lu_lambda[kk].solve(dyn.A);
    const Vector lambda_inv_drift = lu_lambda[kk].solve(drift[kk]);
    for (std::size_t i = 0; i < N; ++i) {
      // Not symmetric for N > 1: M Lambda^{-1} is only symmetric for one player.
      M[kk][i] = cost[i].Q + dyn.A.transpose() * M[kk + 1][i] * lambda_inv_A;
      m[kk][i] = cost[i].q + dyn.A.transpose() *
                                 (m[kk + 1][i] + M[kk + 1][i] * lambda_inv_drift);
    }
  }

  StrategySet out;
  out.type = EquilibriumType::kOpenLoop;
  out.laws.assign(K, std::vector<AffineLaw>(N));
  if (deviations) {
    deviations->assign(K + 1, Vector());
    (*deviations)[0] = dx0;
  }

  Vector dx = dx0;
  for (std::size_t kk = 0; kk < K; ++kk) {
    const auto& dyn = lq.dynamics[kk];
    const auto& cost = lq.costs[kk];
    const Vector dx_next = lu_lambda[kk].solve(dyn.A * dx + drift[kk]);
    for (std::size_t i = 0; i < N; ++i) {
      Vector rhs = dyn.B[i].transpose() * (M[kk + 1][i] * dx_next + m[kk + 1][i]);
      if (!detail::is_zero_block(cost[i].r[i])) rhs += cost[i].r[i];
      auto& law = out.laws[kk][i];
      law.gain = Matrix::Zero(lq.input_dim(i), n);
      law.offset = chol_R[kk][i].solve(rhs);
    }
    dx = dx_next;
    if (deviations) (*deviations)[kk + 1] = dx;
  }

  if (values) {
    values->P = std::move(M);
    values->p = std::move(m);
  }
  return out;
}

/// Single-player difference Riccati recursion
///
///   P_k = Q_k + A'P A - A'P B (R + B'P B)^{-1} B'P A
///
/// extended with the linear terms (q, r) in the usual way. Only valid for
/// one-player approximations; used as an oracle for the game solvers.
inline StrategySet riccati_lqr(const LqApproximation& lq,
                               ValueRecursion* values = nullptr) {
  lq.validate();
  if (lq.num_players() != 1) {
    throw std::invalid_argument("riccati_lqr: exactly one player required");
  }
  const std::size_t K = lq.horizon();
  Matrix P = lq.costs[K][0].Q;
  Vector p = lq.costs[K][0].q;
  if (values) {
    values->P.assign(K + 1, std::vector<Matrix>(1));
    values->p.assign(K + 1, std::vector<Vector>(1));
    values->P[K][0] = P;
    values->p[K][0] = p;
  }

  StrategySet out;
  out.type = EquilibriumType::kFeedback;
  out.laws.assign(K, std::vector<AffineLaw>(1));
  for (std::size_t kk = K; kk-- > 0;) {
    const Matrix& A = lq.dynamics[kk].A;
    const Matrix& B = lq.dynamics[kk].B[0];
    const auto& c = lq.costs[kk][0];
    const Matrix PB = P * B;
    const Matrix H = c.R[0] + B.transpose() * PB;
    const Eigen::PartialPivLU<Matrix> lu(H);
    detail::check_condition(lu, kk, "R + B'PB");
    Vector g = B.transpose() * p;
    if (!detail::is_zero_block(c.r[0])) g += c.r[0];
    auto& law = out.laws[kk][0];
    law.gain = lu.solve(PB.transpose() * A);
    law.offset = lu.solve(g);
    const Matrix APB = A.transpose() * PB;
    const Matrix P_new = c.Q + A.transpose() * P * A - APB * law.gain;
    p = c.q + A.transpose() * p - APB * law.offset;
    P = 0.5 * (P_new + P_new.transpose());
    if (values) {
      values->P[kk][0] = P;
      values->p[kk][0] = p;
    }
  }
  return out;
}

}  // namespace ilqgame
