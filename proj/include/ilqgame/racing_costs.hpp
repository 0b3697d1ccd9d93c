#pragma once

// Racing stage and terminal costs for player i and their second-order
// models. Soft constraints are squared hinges gated by their current
// activity; the collision term couples all players.

#include <cmath>
#include <sstream>
#include <vector>

#include "ilqgame/core.hpp"
#include "ilqgame/lq_game.hpp"
#include "ilqgame/track.hpp"
#include "ilqgame/vehicle_dynamics.hpp"

namespace ilqgame {

struct CostParams {
  Eigen::Matrix2d R_input = Eigen::Matrix2d::Identity();  // jerk weight
  double c_c = 0.0;   // collision
  double c_w = 0.0;   // track boundary
  double c_ax = 0.0;  // longitudinal acceleration limit
  double c_a = 0.0;   // combined acceleration limit
  double c_g = 0.0;   // terminal blocking incentive
  double l_veh = 1.0;
  double w_veh = 1.0;

  /// Every violated invariant, empty when valid.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    auto nonneg = [&](double v, const char* name) {
      if (!(v >= 0.0)) out.push_back(std::string(name) + " must be >= 0");
    };
    nonneg(c_c, "c_c");
    nonneg(c_w, "c_w");
    nonneg(c_ax, "c_ax");
    nonneg(c_a, "c_a");
    nonneg(c_g, "c_g");
    if (!(l_veh > 0.0)) out.push_back("l_veh must be > 0");
    if (!(w_veh > 0.0)) out.push_back("w_veh must be > 0");
    if ((R_input - R_input.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      out.push_back("R must be symmetric");
    } else if (Eigen::LLT<Eigen::Matrix2d>(R_input).info() != Eigen::Success) {
      out.push_back("R must be positive definite");
    }
    return out;
  }

  bool operator==(const CostParams&) const = default;
};

/// Hinge boundaries are active when the violation is >= 0.
struct CostTerms {
  double input = 0.0;
  double collision = 0.0;
  double wall = 0.0;
  double accel_long = 0.0;
  double accel_combined = 0.0;

  double total() const {
    return input + collision + wall + accel_long + accel_combined;
  }
};

namespace detail {

/// exp(1 - (ds/l)^2 - (dn/w)^2)^2
inline double collision_kernel(double ds, double dn, double l, double w) {
  const double a = (ds / l) * (ds / l) + (dn / w) * (dn / w);
  return std::exp(2.0 * (1.0 - a));
}

/// Norm below which the combined-acceleration gradient is set to zero.
inline constexpr double kAccelNormGuard = 1e-9;

}  // namespace detail

inline CostTerms stage_cost_terms(PlayerIndex i, const Vector& joint,
                                  const Eigen::Ref<const Vector>& input_i,
                                  const CostParams& params, const GGDiamond& gg,
                                  const Track& track) {
  const std::size_t N = joint_player_count(joint);
  const auto xi = player_block(joint, i);
  CostTerms t;
  t.input = input_i.dot(params.R_input * input_i);

  for (std::size_t j = 0; j < N; ++j) {
    if (j == i) continue;
    const auto xj = player_block(joint, j);
    t.collision += params.c_c * detail::collision_kernel(xi(kS) - xj(kS),
                                                          xi(kN) - xj(kN),
                                                          params.l_veh,
                                                          params.w_veh);
  }

  const auto widths = track.width_at(xi(kS));
  if (const double h = xi(kN) - widths.left; h >= 0.0) {
    t.wall += params.c_w * h * h;
  }
  if (const double h = -widths.right - xi(kN); h >= 0.0) {
    t.wall += params.c_w * h * h;
  }

  if (const double h = xi(kAx) - gg.ax_max()(xi(kV)); h >= 0.0) {
    t.accel_long = params.c_ax * h * h;
  }
  const double a_norm = std::hypot(xi(kAx), xi(kAy));
  if (const double h = a_norm - gg.rho()(xi(kV)); h >= 0.0) {
    t.accel_combined = params.c_a * h * h;
  }
  return t;
}

inline double stage_cost(PlayerIndex i, const Vector& joint,
                         const Eigen::Ref<const Vector>& input_i,
                         const CostParams& params, const GGDiamond& gg,
                         const Track& track) {
  return stage_cost_terms(i, joint, input_i, params, gg, track).total();
}

/// -s_K^i + c_g sum_{j != i} s_K^j
inline double terminal_cost(PlayerIndex i, const Vector& joint,
                            const CostParams& params) {
  const std::size_t N = joint_player_count(joint);
  double cost = -player_block(joint, i)(kS);
  for (std::size_t j = 0; j < N; ++j) {
    if (j != i) cost += params.c_g * player_block(joint, j)(kS);
  }
  return cost;
}

/// Symmetric eigendecomposition with negative eigenvalues clamped to zero.
inline Matrix project_psd(const Matrix& Q) {
  const Matrix sym = 0.5 * (Q + Q.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
  const Matrix out = eig.eigenvectors() * clamped.asDiagonal() *
                     eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

enum class HessianProjection { kNone, kClampToPsd };

/// Second-order model of player i's stage cost at (joint, input_i). Q and q
/// are over the joint state, R/r are indexed by input owner with only the
/// own-input block nonzero.
inline QuadraticCostStage quadratize_stage(
    PlayerIndex i, const Vector& joint, const Eigen::Ref<const Vector>& input_i,
    const CostParams& params, const GGDiamond& gg, const Track& track,
    HessianProjection projection = HessianProjection::kClampToPsd) {
  const std::size_t N = joint_player_count(joint);
  const Eigen::Index nx = joint.size();
  const auto oi = kPlayerStateDim * static_cast<Eigen::Index>(i);
  const auto xi = player_block(joint, i);

  QuadraticCostStage out;
  out.Q = Matrix::Zero(nx, nx);
  out.q = Vector::Zero(nx);

  // Collision: f = c exp(2 - 2a), a = (ds/l)^2 + (dn/w)^2, d* = player i - j.
  for (std::size_t j = 0; j < N; ++j) {
    if (j == i) continue;
    const auto oj = kPlayerStateDim * static_cast<Eigen::Index>(j);
    const auto xj = player_block(joint, j);
    const double ds = xi(kS) - xj(kS);
    const double dn = xi(kN) - xj(kN);
    const double il2 = 1.0 / (params.l_veh * params.l_veh);
    const double iw2 = 1.0 / (params.w_veh * params.w_veh);
    const double f =
        params.c_c * detail::collision_kernel(ds, dn, params.l_veh, params.w_veh);
    const double g_s = -4.0 * f * ds * il2;
    const double g_n = -4.0 * f * dn * iw2;
    const double h_ss = -4.0 * f * il2 + 16.0 * f * ds * ds * il2 * il2;
    const double h_nn = -4.0 * f * iw2 + 16.0 * f * dn * dn * iw2 * iw2;
    const double h_sn = 16.0 * f * ds * dn * il2 * iw2;

    const Eigen::Index si = oi + kS, ni = oi + kN, sj = oj + kS, nj = oj + kN;
    out.q(si) += g_s;
    out.q(ni) += g_n;
    out.q(sj) -= g_s;
    out.q(nj) -= g_n;
    const Eigen::Index a_idx[2] = {si, ni};
    const Eigen::Index b_idx[2] = {sj, nj};
    const double H[2][2] = {{h_ss, h_sn}, {h_sn, h_nn}};
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        out.Q(a_idx[r], a_idx[c]) += H[r][c];
        out.Q(b_idx[r], b_idx[c]) += H[r][c];
        out.Q(a_idx[r], b_idx[c]) -= H[r][c];
        out.Q(b_idx[r], a_idx[c]) -= H[r][c];
      }
    }
  }

  // Track boundaries. Widths are piecewise constant in s.
  const auto widths = track.width_at(xi(kS));
  if (const double h = xi(kN) - widths.left; h >= 0.0) {
    out.q(oi + kN) += 2.0 * params.c_w * h;
    out.Q(oi + kN, oi + kN) += 2.0 * params.c_w;
  }
  if (const double h = -widths.right - xi(kN); h >= 0.0) {
    out.q(oi + kN) -= 2.0 * params.c_w * h;
    out.Q(oi + kN, oi + kN) += 2.0 * params.c_w;
  }

  // Longitudinal limit: h = a_x - a_x_max(V).
  const auto [ax_max, ax_slope] = gg.ax_max().eval(xi(kV));
  if (const double h = xi(kAx) - ax_max; h >= 0.0) {
    const double c2 = 2.0 * params.c_ax;
    out.q(oi + kAx) += c2 * h;
    out.q(oi + kV) -= c2 * h * ax_slope;
    out.Q(oi + kAx, oi + kAx) += c2;
    out.Q(oi + kAx, oi + kV) -= c2 * ax_slope;
    out.Q(oi + kV, oi + kAx) -= c2 * ax_slope;
    out.Q(oi + kV, oi + kV) += c2 * ax_slope * ax_slope;
  }

  // Combined limit: h = |a| - rho(V).
  const auto [rho, rho_slope] = gg.rho().eval(xi(kV));
  const Eigen::Vector2d a(xi(kAx), xi(kAy));
  const double a_norm = a.norm();
  if (const double h = a_norm - rho; h >= 0.0) {
    const double c2 = 2.0 * params.c_a;
    Eigen::Vector2d unit = Eigen::Vector2d::Zero();
    Eigen::Matrix2d curvature = Eigen::Matrix2d::Zero();
    if (a_norm >= detail::kAccelNormGuard) {
      unit = a / a_norm;
      curvature = (Eigen::Matrix2d::Identity() - unit * unit.transpose()) / a_norm;
    }
    const Eigen::Index ia[2] = {oi + kAx, oi + kAy};
    for (int r = 0; r < 2; ++r) {
      out.q(ia[r]) += c2 * h * unit(r);
      for (int c = 0; c < 2; ++c) {
        out.Q(ia[r], ia[c]) += c2 * (unit(r) * unit(c) + h * curvature(r, c));
      }
      out.Q(ia[r], oi + kV) -= c2 * rho_slope * unit(r);
      out.Q(oi + kV, ia[r]) -= c2 * rho_slope * unit(r);
    }
    out.q(oi + kV) -= c2 * h * rho_slope;
    out.Q(oi + kV, oi + kV) += c2 * rho_slope * rho_slope;
  }

  if (projection == HessianProjection::kClampToPsd) out.Q = project_psd(out.Q);

  out.R.assign(N, Matrix());
  out.r.assign(N, Vector());
  out.R[i] = 2.0 * params.R_input;
  out.r[i] = 2.0 * params.R_input * input_i;
  for (std::size_t j = 0; j < N; ++j) {
    if (j == i) continue;
    out.R[j] = Matrix::Zero(kPlayerInputDim, kPlayerInputDim);
    out.r[j] = Vector::Zero(kPlayerInputDim);
  }
  return out;
}

/// Terminal cost is linear: Q_K = 0, gradient -1 / +c_g on the s slots.
inline QuadraticCostStage quadratize_terminal(PlayerIndex i, const Vector& joint,
                                              const CostParams& params) {
  const std::size_t N = joint_player_count(joint);
  QuadraticCostStage out;
  out.Q = Matrix::Zero(joint.size(), joint.size());
  out.q = Vector::Zero(joint.size());
  for (std::size_t j = 0; j < N; ++j) {
    out.q(kPlayerStateDim * static_cast<Eigen::Index>(j) + kS) =
        j == i ? -1.0 : params.c_g;
  }
  return out;
}

}  // namespace ilqgame
