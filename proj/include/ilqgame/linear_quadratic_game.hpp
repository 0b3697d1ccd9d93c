#pragma once

// Game with linear time-varying dynamics and quadratic costs, stated in
// absolute coordinates. Its local LQ approximation is exact, which makes it
// the reference problem for checking the iterative solver.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ilqgame/game.hpp"

namespace ilqgame {

class LinearQuadraticGame {
 public:
  LinearQuadraticGame() = default;

  /// `model` holds the absolute-coordinate matrices; costs are evaluated as
  /// 1/2 x'Qx + q'x + sum_j (1/2 u_j'R^{ij}u_j + r^{ij}'u_j).
  /// `player_state_dims` partitions the joint state into per-player blocks.
  LinearQuadraticGame(LqApproximation model,
                      std::vector<Eigen::Index> player_state_dims)
      : model_(std::move(model)), state_dims_(std::move(player_state_dims)) {
    model_.validate();
    if (state_dims_.size() != model_.num_players()) {
      throw std::invalid_argument("LinearQuadraticGame: one state block per player");
    }
    Eigen::Index total = 0;
    for (auto d : state_dims_) {
      offsets_.push_back(total);
      total += d;
    }
    if (total != model_.state_dim()) {
      throw std::invalid_argument("LinearQuadraticGame: state blocks do not add up");
    }
  }

  const LqApproximation& model() const noexcept { return model_; }
  std::size_t horizon() const noexcept { return model_.horizon(); }

  std::size_t num_players() const noexcept { return model_.num_players(); }
  Eigen::Index state_dim() const { return model_.state_dim(); }
  Eigen::Index input_dim(PlayerIndex i) const { return model_.input_dim(i); }
  Eigen::Index player_state_offset(PlayerIndex i) const { return offsets_[i]; }
  Eigen::Index player_state_dim(PlayerIndex i) const { return state_dims_[i]; }

  Vector step(std::size_t k, const Vector& x, std::span<const Vector> u) const {
    const auto& d = model_.dynamics.at(k);
    Vector next = d.A * x;
    for (std::size_t j = 0; j < u.size(); ++j) next.noalias() += d.B[j] * u[j];
    return next;
  }

  void linearize(std::size_t k, const Vector&, std::span<const Vector>,
                 Matrix& A, std::vector<Matrix>& B) const {
    const auto& d = model_.dynamics.at(k);
    A = d.A;
    B = d.B;
  }

  double stage_cost(PlayerIndex i, std::size_t k, const Vector& x,
                    std::span<const Vector> u) const {
    const auto& c = model_.costs.at(k)[i];
    double cost = 0.5 * x.dot(c.Q * x) + c.q.dot(x);
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (c.R[j].size() != 0) cost += 0.5 * u[j].dot(c.R[j] * u[j]);
      if (c.r[j].size() != 0) cost += c.r[j].dot(u[j]);
    }
    return cost;
  }

  double terminal_cost(PlayerIndex i, const Vector& x) const {
    const auto& c = model_.costs.back()[i];
    return 0.5 * x.dot(c.Q * x) + c.q.dot(x);
  }

  QuadraticCostStage quadratize_stage(PlayerIndex i, std::size_t k,
                                      const Vector& x,
                                      std::span<const Vector> u) const {
    QuadraticCostStage out = model_.costs.at(k)[i];
    out.q += out.Q * x;
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (out.R[j].size() == 0) continue;
      const Vector grad = out.R[j] * u[j];
      if (out.r[j].size() == 0) {
        out.r[j] = grad;
      } else {
        out.r[j] += grad;
      }
    }
    return out;
  }

  QuadraticCostStage quadratize_terminal(PlayerIndex i, const Vector& x) const {
    QuadraticCostStage out = model_.costs.back()[i];
    out.q += out.Q * x;
    return out;
  }

 private:
  LqApproximation model_;
  std::vector<Eigen::Index> state_dims_;
  std::vector<Eigen::Index> offsets_;
};

struct RandomLqSpec {
  std::size_t num_players = 2;
  Eigen::Index state_dim_per_player = 2;
  Eigen::Index input_dim = 1;
  std::size_t horizon = 10;
  std::uint64_t seed = 1;
  /// Linear cost terms on states and own inputs.
  bool linear_terms = true;
  /// Cross-player input weights R^{ij}, j != i.
  bool cross_input_terms = false;
};

namespace detail {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                            Eigen::Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

inline Matrix random_psd(std::mt19937_64& rng, Eigen::Index n, double scale) {
  const Matrix L = random_matrix(rng, n, n, scale);
  return L * L.transpose() / static_cast<double>(n);
}

}  // namespace detail

/// Random coupled LQ game with PSD state weights and PD own-input weights.
inline LqApproximation random_lq_model(const RandomLqSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::size_t N = spec.num_players;
  const Eigen::Index n = spec.state_dim_per_player * static_cast<Eigen::Index>(N);
  const Eigen::Index m = spec.input_dim;
  const std::size_t K = spec.horizon;

  LqApproximation lq;
  lq.dynamics.resize(K);
  lq.costs.assign(K + 1, std::vector<QuadraticCostStage>(N));
  for (std::size_t k = 0; k < K; ++k) {
    auto& d = lq.dynamics[k];
    d.A = Matrix::Identity(n, n) + detail::random_matrix(rng, n, n, 0.15);
    for (std::size_t j = 0; j < N; ++j) {
      d.B.push_back(detail::random_matrix(rng, n, m, 0.5));
    }
  }
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      auto& c = lq.costs[k][i];
      c.Q = detail::random_psd(rng, n, 1.0);
      c.q = spec.linear_terms ? Vector(detail::random_matrix(rng, n, 1, 0.5))
                              : Vector(Vector::Zero(n));
      if (k == K) continue;
      c.R.assign(N, Matrix());
      c.r.assign(N, Vector());
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i) {
          c.R[j] = detail::random_psd(rng, m, 1.0) + Matrix::Identity(m, m);
          c.r[j] = spec.linear_terms ? Vector(detail::random_matrix(rng, m, 1, 0.5))
                                     : Vector(Vector::Zero(m));
        } else if (spec.cross_input_terms) {
          c.R[j] = detail::random_psd(rng, m, 0.5);
          c.r[j] = detail::random_matrix(rng, m, 1, 0.2);
        }
      }
    }
  }
  return lq;
}

inline LinearQuadraticGame random_lq_game(const RandomLqSpec& spec) {
  return LinearQuadraticGame(
      random_lq_model(spec),
      std::vector<Eigen::Index>(spec.num_players, spec.state_dim_per_player));
}

}  // namespace ilqgame
