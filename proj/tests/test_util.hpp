#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "ilqgame/ilqgame.hpp"

namespace testutil {

using ilqgame::Matrix;
using ilqgame::Vector;

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(ILQGAME_SCENARIO_DIR) / name;
}

/// Central differences of a vector map.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                          double h = 1e-6) {
  const Vector f0 = f(x);
  Matrix J(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vector xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    J.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vector xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    g(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// |a - b|_inf / (1 + |b|_inf)
inline double scaled_error(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// A two-segment track with a left-hand bend, used by dynamics and cost checks.
inline ilqgame::Track bent_track() {
  return ilqgame::Track({{60.0, 0.0, 6.0, 5.0}, {80.0, 0.02, 5.0, 6.0}, {60.0, -0.015, 6.0, 6.0}});
}

/// Random player state well inside the track and away from segment joints.
inline ilqgame::PlayerState random_player_state(std::mt19937_64& rng, double s_lo = 5.0,
                                                double s_hi = 190.0) {
  ilqgame::PlayerState x;
  do {
    x.s = uniform(rng, s_lo, s_hi);
  } while (std::abs(x.s - 60.0) < 5.0 || std::abs(x.s - 140.0) < 5.0);
  x.V = uniform(rng, 5.0, 30.0);
  x.n = uniform(rng, -4.0, 4.0);
  x.chi = uniform(rng, -0.3, 0.3);
  x.a_x = uniform(rng, -6.0, 6.0);
  x.a_y = uniform(rng, -6.0, 6.0);
  return x;
}

inline ilqgame::CostParams racing_params() {
  ilqgame::CostParams c;
  c.R_input = Eigen::Matrix2d{{0.2, 0.05}, {0.05, 0.1}};
  c.c_c = 2.0;
  c.c_w = 30.0;
  c.c_ax = 8.0;
  c.c_a = 5.0;
  c.c_g = 0.3;
  c.l_veh = 5.0;
  c.w_veh = 2.0;
  return c;
}

}  // namespace testutil
