#pragma once

// Curvilinear point-mass vehicle model, RK4 discretization, and the exact
// Jacobians of the discrete step map.
//
// Per-player state (s, V, n, chi, a_x, a_y), input (j_x, j_y):
//   s'   = V cos(chi) / (1 - n kappa(s))
//   V'   = a_x
//   n'   = V sin(chi)
//   chi' = a_y / V - kappa(s) s'
//   a_x' = j_x
//   a_y' = j_y

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "ilqgame/core.hpp"
#include "ilqgame/track.hpp"

namespace ilqgame {

inline constexpr int kPlayerStateDim = 6;
inline constexpr int kPlayerInputDim = 2;

/// Lower speed bound used inside the 1/V term.
inline constexpr double kMinSpeed = 0.1;

/// Offsets into a player's state block.
enum StateSlot : int { kS = 0, kV = 1, kN = 2, kChi = 3, kAx = 4, kAy = 5 };
enum InputSlot : int { kJx = 0, kJy = 1 };

using PlayerVector = Eigen::Matrix<double, kPlayerStateDim, 1>;
using PlayerJacobian = Eigen::Matrix<double, kPlayerStateDim, kPlayerStateDim>;
using InputVector = Eigen::Matrix<double, kPlayerInputDim, 1>;
using InputJacobian = Eigen::Matrix<double, kPlayerStateDim, kPlayerInputDim>;

struct PlayerState {
  double s = 0.0;
  double V = 0.0;
  double n = 0.0;
  double chi = 0.0;
  double a_x = 0.0;
  double a_y = 0.0;

  PlayerVector to_vector() const {
    PlayerVector v;
    v << s, V, n, chi, a_x, a_y;
    return v;
  }
  static PlayerState from_vector(const Eigen::Ref<const Vector>& v) {
    return {v(kS), v(kV), v(kN), v(kChi), v(kAx), v(kAy)};
  }

  bool operator==(const PlayerState&) const = default;
};

struct PlayerInput {
  double j_x = 0.0;
  double j_y = 0.0;

  InputVector to_vector() const { return InputVector(j_x, j_y); }
  static PlayerInput from_vector(const Eigen::Ref<const Vector>& v) {
    return {v(kJx), v(kJy)};
  }

  bool operator==(const PlayerInput&) const = default;
};

/// Joint state: player blocks of size 6 stacked in player order.
inline Vector pack_joint(std::span<const PlayerState> players) {
  Vector x(kPlayerStateDim * static_cast<Eigen::Index>(players.size()));
  for (std::size_t i = 0; i < players.size(); ++i) {
    x.segment<kPlayerStateDim>(kPlayerStateDim * static_cast<Eigen::Index>(i)) =
        players[i].to_vector();
  }
  return x;
}

inline std::size_t joint_player_count(const Vector& x) {
  return static_cast<std::size_t>(x.size() / kPlayerStateDim);
}

inline auto player_block(const Vector& x, PlayerIndex i) {
  return x.segment<kPlayerStateDim>(kPlayerStateDim *
                                    static_cast<Eigen::Index>(i));
}

inline auto player_block(Vector& x, PlayerIndex i) {
  return x.segment<kPlayerStateDim>(kPlayerStateDim *
                                    static_cast<Eigen::Index>(i));
}

/// Piecewise-linear scalar map y(x) through sorted knots, held constant
/// outside the knot range.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots)
      : knots_(std::move(knots)) {
    if (knots_.empty()) {
      throw std::invalid_argument("piecewise-linear table needs >= 1 knot");
    }
    for (std::size_t k = 1; k < knots_.size(); ++k) {
      if (!(knots_[k].first > knots_[k - 1].first)) {
        throw std::invalid_argument(
            "piecewise-linear knots must be strictly increasing");
      }
    }
  }

  static PiecewiseLinear constant(double y) { return PiecewiseLinear({{0.0, y}}); }

  double operator()(double x) const { return eval(x).first; }

  /// Value and slope. At interior knots the slope of the later piece is used.
  std::pair<double, double> eval(double x) const {
    if (x <= knots_.front().first) return {knots_.front().second, 0.0};
    if (x >= knots_.back().first) return {knots_.back().second, 0.0};
    const auto it = std::upper_bound(
        knots_.begin(), knots_.end(), x,
        [](double v, const auto& knot) { return v < knot.first; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double slope = (hi.second - lo.second) / (hi.first - lo.first);
    return {lo.second + slope * (x - lo.first), slope};
  }

  const std::vector<std::pair<double, double>>& knots() const noexcept {
    return knots_;
  }

  bool operator==(const PiecewiseLinear&) const = default;

 private:
  std::vector<std::pair<double, double>> knots_;
};

/// Velocity-dependent gg-diamond: a_x <= a_x_max(V), |a| <= rho(V).
class GGDiamond {
 public:
  GGDiamond() = default;
  GGDiamond(PiecewiseLinear ax_max, PiecewiseLinear rho)
      : ax_max_(std::move(ax_max)), rho_(std::move(rho)) {
    const auto& ax = ax_max_.knots();
    for (std::size_t k = 0; k < ax.size(); ++k) {
      if (ax[k].second < 0.0) {
        throw std::invalid_argument("a_x_max table must be non-negative");
      }
      if (k > 0 && ax[k].second > ax[k - 1].second) {
        throw std::invalid_argument("a_x_max table must be non-increasing in V");
      }
    }
    if (ax.back().second != 0.0) {
      throw std::invalid_argument("a_x_max table must reach 0 at V_max");
    }
    for (const auto& [v, r] : rho_.knots()) {
      if (r < 0.0) throw std::invalid_argument("rho table must be non-negative");
    }
  }

  /// a_x_max(V) = a0 (1 - V / v_max), constant rho.
  static GGDiamond linear(double a0, double v_max, double rho) {
    return GGDiamond(PiecewiseLinear({{0.0, a0}, {v_max, 0.0}}),
                     PiecewiseLinear::constant(rho));
  }

  const PiecewiseLinear& ax_max() const noexcept { return ax_max_; }
  const PiecewiseLinear& rho() const noexcept { return rho_; }

  /// Speed at which a_x_max first reaches zero.
  double v_max() const {
    for (const auto& [v, a] : ax_max_.knots()) {
      if (a == 0.0) return v;
    }
    return ax_max_.knots().back().first;
  }

  bool operator==(const GGDiamond&) const = default;

 private:
  PiecewiseLinear ax_max_ = PiecewiseLinear::constant(0.0);
  PiecewiseLinear rho_ = PiecewiseLinear::constant(0.0);
};

/// Counts evaluations where the speed floor was applied.
struct DynamicsDiagnostics {
  std::size_t speed_floor_hits = 0;
};

namespace detail {

struct FrameTerms {
  double kappa;
  double denom;  // 1 - n kappa
  double speed;  // V after the floor
  bool floored;
};

inline FrameTerms frame_terms(const Eigen::Ref<const PlayerVector>& x,
                              const Track& track) {
  const double kappa = track.curvature_at(x(kS));
  const double denom = 1.0 - x(kN) * kappa;
  if (!(denom > 0.0)) {
    std::ostringstream msg;
    msg << "curvilinear singularity: 1 - n*kappa = " << denom << " at s = "
        << x(kS) << ", n = " << x(kN);
    throw SingularityError(msg.str());
  }
  const bool floored = x(kV) < kMinSpeed;
  return {kappa, denom, floored ? kMinSpeed : x(kV), floored};
}

}  // namespace detail

/// Continuous-time state derivative of one player.
inline PlayerVector derivative(const Eigen::Ref<const PlayerVector>& x,
                               const Eigen::Ref<const InputVector>& u,
                               const Track& track,
                               DynamicsDiagnostics* diag = nullptr) {
  const auto ft = detail::frame_terms(x, track);
  if (ft.floored && diag) ++diag->speed_floor_hits;
  const double V = ft.speed;
  const double c = std::cos(x(kChi));
  const double sn = std::sin(x(kChi));
  const double s_dot = V * c / ft.denom;
  PlayerVector dx;
  dx(kS) = s_dot;
  dx(kV) = x(kAx);
  dx(kN) = V * sn;
  dx(kChi) = x(kAy) / V - ft.kappa * s_dot;
  dx(kAx) = u(kJx);
  dx(kAy) = u(kJy);
  return dx;
}

inline PlayerVector derivative(const PlayerState& x, const PlayerInput& u,
                               const Track& track,
                               DynamicsDiagnostics* diag = nullptr) {
  return derivative(x.to_vector(), u.to_vector(), track, diag);
}

/// Jacobian of the continuous dynamics with respect to the player state.
/// Curvature is piecewise constant, so d/ds terms vanish.
inline PlayerJacobian state_jacobian(const Eigen::Ref<const PlayerVector>& x,
                                     const Track& track) {
  const auto ft = detail::frame_terms(x, track);
  const double V = ft.speed;
  const double k = ft.kappa;
  const double D = ft.denom;
  const double c = std::cos(x(kChi));
  const double sn = std::sin(x(kChi));
  // d(V)/d(V) is zero once the floor is active.
  const double dV = ft.floored ? 0.0 : 1.0;

  PlayerJacobian J = PlayerJacobian::Zero();
  J(kS, kV) = dV * c / D;
  J(kS, kN) = V * c * k / (D * D);
  J(kS, kChi) = -V * sn / D;

  J(kV, kAx) = 1.0;

  J(kN, kV) = dV * sn;
  J(kN, kChi) = V * c;

  J(kChi, kV) = dV * (-x(kAy) / (V * V) - k * c / D);
  J(kChi, kN) = -k * J(kS, kN);
  J(kChi, kChi) = -k * J(kS, kChi);
  J(kChi, kAy) = 1.0 / V;
  return J;
}

inline InputJacobian input_jacobian() {
  InputJacobian B = InputJacobian::Zero();
  B(kAx, kJx) = 1.0;
  B(kAy, kJy) = 1.0;
  return B;
}

/// One classic RK4 step of a single player with zero-order-hold input.
inline PlayerVector step_player(const Eigen::Ref<const PlayerVector>& x,
                                const Eigen::Ref<const InputVector>& u,
                                const Track& track, double dt,
                                DynamicsDiagnostics* diag = nullptr) {
  if (dt == 0.0) return x;
  const PlayerVector k1 = derivative(x, u, track, diag);
  const PlayerVector k2 = derivative(x + 0.5 * dt * k1, u, track, diag);
  const PlayerVector k3 = derivative(x + 0.5 * dt * k2, u, track, diag);
  const PlayerVector k4 = derivative(x + dt * k3, u, track, diag);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct PlayerStepJacobian {
  PlayerJacobian A;
  InputJacobian B;
};

/// Exact Jacobians of step_player, chained through the four RK4 stages.
inline PlayerStepJacobian step_player_jacobian(
    const Eigen::Ref<const PlayerVector>& x,
    const Eigen::Ref<const InputVector>& u, const Track& track, double dt) {
  const InputJacobian Bc = input_jacobian();
  const PlayerJacobian I = PlayerJacobian::Identity();

  const PlayerVector k1 = derivative(x, u, track);
  const PlayerJacobian dk1_dx = state_jacobian(x, track);
  const InputJacobian dk1_du = Bc;

  const PlayerVector x2 = x + 0.5 * dt * k1;
  const PlayerVector k2 = derivative(x2, u, track);
  const PlayerJacobian J2 = state_jacobian(x2, track);
  const PlayerJacobian dk2_dx = J2 * (I + 0.5 * dt * dk1_dx);
  const InputJacobian dk2_du = J2 * (0.5 * dt * dk1_du) + Bc;

  const PlayerVector x3 = x + 0.5 * dt * k2;
  const PlayerVector k3 = derivative(x3, u, track);
  const PlayerJacobian J3 = state_jacobian(x3, track);
  const PlayerJacobian dk3_dx = J3 * (I + 0.5 * dt * dk2_dx);
  const InputJacobian dk3_du = J3 * (0.5 * dt * dk2_du) + Bc;

  const PlayerVector x4 = x + dt * k3;
  const PlayerJacobian J4 = state_jacobian(x4, track);
  const PlayerJacobian dk4_dx = J4 * (I + dt * dk3_dx);
  const InputJacobian dk4_du = J4 * (dt * dk3_du) + Bc;

  return {I + dt / 6.0 * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx),
          dt / 6.0 * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)};
}

/// Joint RK4 step; players evolve independently under their own inputs.
inline Vector step(const Vector& joint, std::span<const Vector> inputs,
                   const Track& track, double dt,
                   DynamicsDiagnostics* diag = nullptr) {
  const std::size_t n_players = joint_player_count(joint);
  if (inputs.size() != n_players) {
    throw std::invalid_argument("step: one input per player required");
  }
  Vector next(joint.size());
  for (std::size_t i = 0; i < n_players; ++i) {
    player_block(next, i) =
        step_player(player_block(joint, i), inputs[i], track, dt, diag);
  }
  return next;
}

/// Linearization of the joint step map at (x, u): A is block diagonal,
/// B[i] is nonzero only in player i's rows.
inline void linearize_step(const Vector& joint, std::span<const Vector> inputs,
                           const Track& track, double dt, Matrix& A,
                           std::vector<Matrix>& B) {
  const std::size_t n_players = joint_player_count(joint);
  const auto nx = joint.size();
  A.setZero(nx, nx);
  B.assign(n_players, Matrix::Zero(nx, kPlayerInputDim));
  for (std::size_t i = 0; i < n_players; ++i) {
    const auto off = kPlayerStateDim * static_cast<Eigen::Index>(i);
    const auto jac =
        step_player_jacobian(player_block(joint, i), inputs[i], track, dt);
    A.block<kPlayerStateDim, kPlayerStateDim>(off, off) = jac.A;
    B[i].block<kPlayerStateDim, kPlayerInputDim>(off, 0) = jac.B;
  }
}

}  // namespace ilqgame
