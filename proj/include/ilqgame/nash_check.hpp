#pragma once

// Exact Nash verification for LQ games. Best responses are computed by
// routes independent of the game recursions: a dense batch QP over the
// whole input sequence, and a single-player Riccati solve on a state
// augmented with a constant 1.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ilqgame/core.hpp"
#include "ilqgame/lq_game.hpp"

namespace ilqgame {

/// Deviation inputs, [stage][player].
using LqInputs = std::vector<std::vector<Vector>>;

inline std::vector<Vector> lq_rollout(const LqApproximation& lq, const Vector& dx0,
                                      const LqInputs& inputs) {
  std::vector<Vector> xs{dx0};
  for (std::size_t k = 0; k < lq.horizon(); ++k) {
    Vector next = lq.dynamics[k].A * xs.back();
    for (std::size_t j = 0; j < lq.num_players(); ++j) {
      next.noalias() += lq.dynamics[k].B[j] * inputs[k][j];
    }
    xs.push_back(std::move(next));
  }
  return xs;
}

/// Player i's quadratic cost of a deviation trajectory.
inline double lq_cost(const LqApproximation& lq, PlayerIndex i,
                      const std::vector<Vector>& xs, const LqInputs& inputs) {
  double J = 0.0;
  for (std::size_t k = 0; k <= lq.horizon(); ++k) {
    const auto& c = lq.costs[k][i];
    J += 0.5 * xs[k].dot(c.Q * xs[k]) + c.q.dot(xs[k]);
    if (k == lq.horizon()) break;
    for (std::size_t j = 0; j < lq.num_players(); ++j) {
      if (c.R[j].size() != 0) J += 0.5 * inputs[k][j].dot(c.R[j] * inputs[k][j]);
      if (c.r[j].size() != 0) J += c.r[j].dot(inputs[k][j]);
    }
  }
  return J;
}

struct LqPlay {
  std::vector<Vector> states;
  LqInputs inputs;
};

/// Closed-loop rollout of du = -K dx - k from dx0.
inline LqPlay strategy_rollout(const LqApproximation& lq,
                               const StrategySet& strategies, const Vector& dx0) {
  LqPlay play;
  play.states.push_back(dx0);
  for (std::size_t k = 0; k < lq.horizon(); ++k) {
    std::vector<Vector> u;
    Vector next = lq.dynamics[k].A * play.states[k];
    for (std::size_t j = 0; j < lq.num_players(); ++j) {
      const auto& law = strategies(k, j);
      u.push_back(-law.gain * play.states[k] - law.offset);
      next.noalias() += lq.dynamics[k].B[j] * u.back();
    }
    play.inputs.push_back(std::move(u));
    play.states.push_back(std::move(next));
  }
  return play;
}

/// Single-player affine LQ problem
///   x_{k+1} = F_k x_k + c_k + B_k u_k
///   J = sum_k [1/2 x'Qx + q'x + 1/2 u'Ru + r'u] + 1/2 x_K'Q_K x_K + q_K'x_K
struct AffineLqProblem {
  std::vector<Matrix> F, B;
  std::vector<Vector> c;
  std::vector<Matrix> Q;  // K + 1
  std::vector<Vector> q;  // K + 1
  std::vector<Matrix> R;
  std::vector<Vector> r;
};

/// Minimizes the problem over the stacked input sequence by a dense solve
/// of the normal equations. Throws if the Hessian is not positive definite.
inline std::vector<Vector> batch_optimal_inputs(const AffineLqProblem& p,
                                                const Vector& x0) {
  const std::size_t K = p.F.size();
  const Eigen::Index n = x0.size();
  Eigen::Index total = 0;
  std::vector<Eigen::Index> off;
  for (std::size_t k = 0; k < K; ++k) {
    off.push_back(total);
    total += p.B[k].cols();
  }
  // x_k = free_k + G_k U
  Vector free = x0;
  Matrix G = Matrix::Zero(n, total);
  Matrix H = Matrix::Zero(total, total);
  Vector g = Vector::Zero(total);
  for (std::size_t k = 0; k <= K; ++k) {
    H.noalias() += G.transpose() * p.Q[k] * G;
    g.noalias() += G.transpose() * (p.Q[k] * free + p.q[k]);
    if (k == K) break;
    const auto m = p.B[k].cols();
    H.block(off[k], off[k], m, m) += p.R[k];
    if (p.r[k].size() != 0) g.segment(off[k], m) += p.r[k];
    free = p.F[k] * free + p.c[k];
    G = p.F[k] * G;
    G.middleCols(off[k], m) += p.B[k];
  }
  const Eigen::LLT<Matrix> llt(0.5 * (H + H.transpose()));
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("batch_optimal_inputs: problem is not strictly convex");
  }
  const Vector U = -llt.solve(g);
  std::vector<Vector> out;
  for (std::size_t k = 0; k < K; ++k) out.push_back(U.segment(off[k], p.B[k].cols()));
  return out;
}

struct LqGap {
  double equilibrium_cost = 0.0;
  double best_response_cost = 0.0;
  double gap = 0.0;
  /// gap / max(1, |equilibrium_cost|)
  double relative = 0.0;
};

inline LqGap make_gap(double eq, double br) {
  return {eq, br, eq - br, (eq - br) / std::max(1.0, std::abs(eq))};
}

/// Best response of player i to frozen opponent input sequences.
inline LqInputs openloop_best_response(const LqApproximation& lq, PlayerIndex i,
                                       const Vector& dx0, const LqInputs& played) {
  const std::size_t K = lq.horizon();
  AffineLqProblem p;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& d = lq.dynamics[k];
    Vector drift = Vector::Zero(dx0.size());
    for (std::size_t j = 0; j < lq.num_players(); ++j) {
      if (j != i) drift.noalias() += d.B[j] * played[k][j];
    }
    p.F.push_back(d.A);
    p.B.push_back(d.B[i]);
    p.c.push_back(std::move(drift));
    p.R.push_back(lq.costs[k][i].R[i]);
    p.r.push_back(lq.costs[k][i].r[i]);
  }
  for (std::size_t k = 0; k <= K; ++k) {
    p.Q.push_back(lq.costs[k][i].Q);
    p.q.push_back(lq.costs[k][i].q);
  }
  const auto best = batch_optimal_inputs(p, dx0);
  LqInputs out = played;
  for (std::size_t k = 0; k < K; ++k) out[k][i] = best[k];
  return out;
}

/// Gain player i can realize by deviating from `played` while all others
/// keep their input sequences.
inline LqGap openloop_best_response_gap(const LqApproximation& lq, PlayerIndex i,
                                        const Vector& dx0, const LqInputs& played) {
  const double eq = lq_cost(lq, i, lq_rollout(lq, dx0, played), played);
  const LqInputs br = openloop_best_response(lq, i, dx0, played);
  return make_gap(eq, lq_cost(lq, i, lq_rollout(lq, dx0, br), br));
}

namespace detail {

/// Player i's problem when the opponents apply their affine laws:
/// dynamics A - sum_{j!=i} B^j K^j with drift -sum B^j k^j, and the
/// opponents' input costs folded into the state cost.
inline AffineLqProblem closed_loop_problem(const LqApproximation& lq,
                                           const StrategySet& s, PlayerIndex i) {
  const std::size_t K = lq.horizon();
  const Eigen::Index n = lq.state_dim();
  AffineLqProblem p;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& d = lq.dynamics[k];
    const auto& c = lq.costs[k][i];
    Matrix F = d.A;
    Vector drift = Vector::Zero(n);
    Matrix Q = c.Q;
    Vector q = c.q;
    for (std::size_t j = 0; j < lq.num_players(); ++j) {
      if (j == i) continue;
      const auto& law = s(k, j);
      F.noalias() -= d.B[j] * law.gain;
      drift.noalias() -= d.B[j] * law.offset;
      if (c.R[j].size() != 0) {
        Q.noalias() += law.gain.transpose() * c.R[j] * law.gain;
        q.noalias() += law.gain.transpose() * c.R[j] * law.offset;
      }
      if (c.r[j].size() != 0) q.noalias() -= law.gain.transpose() * c.r[j];
    }
    p.F.push_back(std::move(F));
    p.c.push_back(std::move(drift));
    p.B.push_back(d.B[i]);
    p.Q.push_back(std::move(Q));
    p.q.push_back(std::move(q));
    p.R.push_back(c.R[i]);
    p.r.push_back(c.r[i]);
  }
  p.Q.push_back(lq.costs[K][i].Q);
  p.q.push_back(lq.costs[K][i].q);
  return p;
}

}  // namespace detail

/// Player i's optimal affine feedback law against the opponents' frozen
/// laws, from the difference Riccati recursion on the state [dx; 1].
/// Returns the laws in the original coordinates, one per stage.
inline std::vector<AffineLaw> feedback_best_response(const LqApproximation& lq,
                                                     const StrategySet& s,
                                                     PlayerIndex i) {
  const AffineLqProblem p = detail::closed_loop_problem(lq, s, i);
  const std::size_t K = lq.horizon();
  const Eigen::Index n = lq.state_dim();

  LqApproximation aug;
  aug.dynamics.resize(K);
  aug.costs.assign(K + 1, std::vector<QuadraticCostStage>(1));
  auto augment_cost = [n](const Matrix& Q, const Vector& q) {
    Matrix Qa = Matrix::Zero(n + 1, n + 1);
    Qa.topLeftCorner(n, n) = Q;
    Qa.topRightCorner(n, 1) = q;
    Qa.bottomLeftCorner(1, n) = q.transpose();
    return Qa;
  };
  for (std::size_t k = 0; k < K; ++k) {
    Matrix A = Matrix::Zero(n + 1, n + 1);
    A.topLeftCorner(n, n) = p.F[k];
    A.topRightCorner(n, 1) = p.c[k];
    A(n, n) = 1.0;
    Matrix B = Matrix::Zero(n + 1, p.B[k].cols());
    B.topRows(n) = p.B[k];
    aug.dynamics[k].A = std::move(A);
    aug.dynamics[k].B = {std::move(B)};
    auto& c = aug.costs[k][0];
    c.Q = augment_cost(p.Q[k], p.q[k]);
    c.q = Vector::Zero(n + 1);
    c.R = {p.R[k]};
    c.r = {p.r[k]};
  }
  aug.costs[K][0].Q = augment_cost(p.Q[K], p.q[K]);
  aug.costs[K][0].q = Vector::Zero(n + 1);

  const StrategySet sol = riccati_lqr(aug);
  std::vector<AffineLaw> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& law = sol(k, 0);
    out[k].gain = law.gain.leftCols(n);
    out[k].offset = law.gain.col(n) + law.offset;
  }
  return out;
}

/// Gain player i can realize against the opponents' feedback laws by any
/// deviation (the best response from a fixed dx0 is an input sequence).
inline LqGap feedback_best_response_gap(const LqApproximation& lq,
                                        const StrategySet& s, PlayerIndex i,
                                        const Vector& dx0) {
  const LqPlay eq = strategy_rollout(lq, s, dx0);
  const double eq_cost = lq_cost(lq, i, eq.states, eq.inputs);

  const auto best = batch_optimal_inputs(detail::closed_loop_problem(lq, s, i), dx0);
  LqPlay br;
  br.states.push_back(dx0);
  for (std::size_t k = 0; k < lq.horizon(); ++k) {
    std::vector<Vector> u;
    Vector next = lq.dynamics[k].A * br.states[k];
    for (std::size_t j = 0; j < lq.num_players(); ++j) {
      u.push_back(j == i ? best[k]
                         : Vector(-s(k, j).gain * br.states[k] - s(k, j).offset));
      next.noalias() += lq.dynamics[k].B[j] * u.back();
    }
    br.inputs.push_back(std::move(u));
    br.states.push_back(std::move(next));
  }
  return make_gap(eq_cost, lq_cost(lq, i, br.states, br.inputs));
}

/// Largest residual of the stacked feedback conditions over all stages and
/// players, each scaled by 1 + the norms of the terms involved.
inline double feedback_residual(const LqApproximation& lq, const StrategySet& s,
                                const ValueRecursion& values) {
  double worst = 0.0;
  const std::size_t N = lq.num_players();
  for (std::size_t k = 0; k < lq.horizon(); ++k) {
    const auto& d = lq.dynamics[k];
    for (std::size_t i = 0; i < N; ++i) {
      const Matrix& P = values.P[k + 1][i];
      const Vector& p = values.p[k + 1][i];
      const Matrix BiP = d.B[i].transpose() * P;
      const Matrix H = lq.costs[k][i].R[i] + BiP * d.B[i];
      Matrix lhs_K = H * s(k, i).gain;
      Vector lhs_k = H * s(k, i).offset;
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        lhs_K.noalias() += BiP * d.B[j] * s(k, j).gain;
        lhs_k.noalias() += BiP * d.B[j] * s(k, j).offset;
      }
      const Matrix rhs_K = BiP * d.A;
      Vector rhs_k = d.B[i].transpose() * p;
      if (lq.costs[k][i].r[i].size() != 0) rhs_k += lq.costs[k][i].r[i];
      const double scale_K = 1.0 + lhs_K.norm() + rhs_K.norm();
      const double scale_k = 1.0 + lhs_k.norm() + rhs_k.norm();
      worst = std::max(worst, (lhs_K - rhs_K).norm() / scale_K);
      worst = std::max(worst, (lhs_k - rhs_k).norm() / scale_k);
    }
  }
  return worst;
}

}  // namespace ilqgame
