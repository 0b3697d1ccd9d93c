#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace ilqgame;
using testutil::uniform;

namespace {

RacingGame single_player_game(const Track& track, double dt) {
  return RacingGame(track, {RacingPlayer{testutil::racing_params(), GGDiamond::linear(5, 30, 10)}},
                    dt);
}

}  // namespace

TEST(Derivative, StraightTrackSubstitution) {
  const Track t = Track::straight(100.0, 5.0, 5.0);
  const PlayerState x{0.0, 10.0, 0.0, 0.0, 2.0, 1.0};
  const PlayerVector d = derivative(x, PlayerInput{}, t);
  EXPECT_DOUBLE_EQ(d(kS), 10.0);
  EXPECT_DOUBLE_EQ(d(kV), 2.0);
  EXPECT_DOUBLE_EQ(d(kN), 0.0);
  EXPECT_DOUBLE_EQ(d(kChi), 0.1);
  EXPECT_DOUBLE_EQ(d(kAx), 0.0);
  EXPECT_DOUBLE_EQ(d(kAy), 0.0);
}

TEST(Derivative, CurvatureCancelsLateralAcceleration) {
  const Track t({{100.0, 0.01, 5.0, 5.0}});
  const PlayerState x{10.0, 10.0, 0.0, 0.0, 0.0, 1.0};
  EXPECT_NEAR(derivative(x, PlayerInput{}, t)(kChi), 0.0, 1e-15);
}

TEST(Derivative, StraightLineSymmetry) {
  const Track t = Track::straight(100.0, 5.0, 5.0);
  const PlayerState x{3.0, 17.0, 1.5, 0.0, -1.0, 0.5};
  const PlayerVector d = derivative(x, PlayerInput{0.3, -0.2}, t);
  EXPECT_EQ(d(kN), 0.0);
  EXPECT_EQ(d(kS), 17.0);
  EXPECT_EQ(d(kAx), 0.3);
  EXPECT_EQ(d(kAy), -0.2);
}

TEST(Derivative, SingularityIsHardError) {
  const Track t({{100.0, 0.1, 9.0, 9.0}});
  const PlayerState x{10.0, 10.0, 10.0, 0.0, 0.0, 0.0};
  EXPECT_THROW(derivative(x, PlayerInput{}, t), SingularityError);
}

TEST(Derivative, SpeedFloorCountsHits) {
  const Track t = Track::straight(100.0, 5.0, 5.0);
  DynamicsDiagnostics diag;
  const PlayerState x{10.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  const PlayerVector d = derivative(x.to_vector(), InputVector::Zero(), t, &diag);
  EXPECT_EQ(diag.speed_floor_hits, 1u);
  EXPECT_TRUE(d.allFinite());
  EXPECT_DOUBLE_EQ(d(kChi), 1.0 / kMinSpeed);
}

TEST(Step, ConstantVelocityIsExact) {
  const Track t = Track::straight(100.0, 5.0, 5.0);
  const PlayerState x{20.0, 10.0, 0.5, 0.0, 0.0, 0.0};
  const PlayerVector next = step_player(x.to_vector(), InputVector::Zero(), t, 0.1);
  EXPECT_NEAR(next(kS), 21.0, 1e-12);
  EXPECT_EQ(next(kV), 10.0);
  EXPECT_EQ(next(kN), 0.5);
  EXPECT_EQ(next(kChi), 0.0);
  EXPECT_EQ(next(kAx), 0.0);
  EXPECT_EQ(next(kAy), 0.0);
}

TEST(Step, ZeroDtIsIdentity) {
  const Track t = testutil::bent_track();
  std::mt19937_64 rng(1);
  const Vector x = pack_joint(std::vector{testutil::random_player_state(rng),
                                          testutil::random_player_state(rng)});
  const std::vector<Vector> u{Vector::Constant(2, 0.7), Vector::Constant(2, -0.4)};
  EXPECT_EQ(step(x, u, t, 0.0), x);
}

TEST(Step, LongitudinalAccelerationIsExact) {
  const Track t = Track::straight(100.0, 5.0, 5.0);
  const PlayerState x{0.0, 10.0, 0.0, 0.0, 2.0, 0.0};
  const PlayerVector next = step_player(x.to_vector(), InputVector::Zero(), t, 0.1);
  EXPECT_NEAR(next(kV), 10.2, 1e-14);
  EXPECT_NEAR(next(kS), 1.0 + 0.5 * 2.0 * 0.01, 1e-14);
}

TEST(Step, PlayersEvolveIndependently) {
  const Track t = testutil::bent_track();
  std::mt19937_64 rng(2);
  const auto a = testutil::random_player_state(rng);
  const auto b = testutil::random_player_state(rng);
  const Vector ua = Vector::Constant(2, 0.3), ub = Vector::Constant(2, -0.8);
  const Vector joint = step(pack_joint(std::vector{a, b}), std::vector{ua, ub}, t, 0.1);
  EXPECT_EQ(Vector(joint.head(6)), Vector(step_player(a.to_vector(), ua, t, 0.1)));
  EXPECT_EQ(Vector(joint.tail(6)), Vector(step_player(b.to_vector(), ub, t, 0.1)));
}

TEST(Step, PropagatesSingularity) {
  const Track t({{100.0, 0.1, 9.9, 9.9}});
  const PlayerState x{10.0, 10.0, 10.5, 0.0, 0.0, 0.0};
  EXPECT_THROW(step_player(x.to_vector(), InputVector::Zero(), t, 0.5), SingularityError);
}

TEST(Rollout, EmptyHorizonReturnsInitialState) {
  const RacingGame g = single_player_game(Track::straight(500, 5, 5), 0.1);
  const Vector x0 = PlayerState{0, 20, 0, 0, 0, 0}.to_vector();
  const auto traj = rollout(g, x0, {});
  ASSERT_EQ(traj.states.size(), 1u);
  EXPECT_EQ(traj.states[0], x0);
}

TEST(Rollout, ConstantSpeedProgress) {
  const RacingGame g = single_player_game(Track::straight(500, 5, 5), 0.1);
  const Vector x0 = PlayerState{0, 20, 1, 0, 0, 0}.to_vector();
  const auto traj = rollout(g, x0, zero_inputs(g, 30));
  for (std::size_t k = 0; k <= 30; ++k) {
    EXPECT_NEAR(traj.states[k](kS), 2.0 * static_cast<double>(k), 1e-12);
    EXPECT_EQ(traj.states[k](kN), 1.0);
  }
}

TEST(Rollout, EqualsSuccessiveSteps) {
  const Track t = testutil::bent_track();
  const RacingGame g = single_player_game(t, 0.1);
  std::mt19937_64 rng(5);
  std::vector<StageInputs> u;
  for (int k = 0; k < 20; ++k) u.push_back({Vector{{uniform(rng, -2, 2), uniform(rng, -2, 2)}}});
  const Vector x0 = PlayerState{10, 20, 0.5, 0.05, 0, 0}.to_vector();
  const auto traj = rollout(g, x0, u);
  Vector x = x0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    x = step(x, u[k], t, 0.1);
    EXPECT_EQ(traj.states[k + 1], x);
  }
}

TEST(Rollout, ErrorCarriesStageIndex) {
  const RacingGame g = single_player_game(Track({{200.0, 0.1, 9.9, 9.9}}), 0.1);
  const Vector x0 = PlayerState{10, 20, 5.0, 1.5, 0, 0}.to_vector();
  try {
    rollout(g, x0, zero_inputs(g, 20));
    FAIL() << "expected singularity";
  } catch (const SingularityError& e) {
    EXPECT_GT(e.stage(), 0);
    EXPECT_NE(std::string(e.what()).find("stage"), std::string::npos);
  }
}

TEST(Linearize, MatchesFiniteDifferences) {
  const Track t = testutil::bent_track();
  std::mt19937_64 rng(11);
  const double dt = 0.1;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector x = pack_joint(std::vector{testutil::random_player_state(rng),
                                            testutil::random_player_state(rng)});
    std::vector<Vector> u{Vector{{uniform(rng, -5, 5), uniform(rng, -5, 5)}},
                          Vector{{uniform(rng, -5, 5), uniform(rng, -5, 5)}}};
    Matrix A;
    std::vector<Matrix> B;
    linearize_step(x, u, t, dt, A, B);

    const Matrix A_fd = testutil::fd_jacobian([&](const Vector& xx) { return step(xx, u, t, dt); }, x);
    Matrix AB(A.rows(), A.cols() + 4), AB_fd(A.rows(), A.cols() + 4);
    AB << A, B[0], B[1];
    Matrix B_fd[2];
    for (int i = 0; i < 2; ++i) {
      B_fd[i] = testutil::fd_jacobian(
          [&](const Vector& ui) {
            auto uu = u;
            uu[i] = ui;
            return step(x, uu, t, dt);
          },
          u[i]);
    }
    AB_fd << A_fd, B_fd[0], B_fd[1];
    EXPECT_LE(testutil::scaled_error(AB_fd, AB), 1e-5) << "trial " << trial;
  }
}

TEST(Linearize, InterPlayerBlocksAreExactlyZero) {
  const Track t = testutil::bent_track();
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = pack_joint(std::vector{testutil::random_player_state(rng),
                                            testutil::random_player_state(rng),
                                            testutil::random_player_state(rng)});
    const std::vector<Vector> u(3, Vector::Constant(2, 0.5));
    Matrix A;
    std::vector<Matrix> B;
    linearize_step(x, u, t, 0.1, A, B);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        EXPECT_TRUE((A.block(6 * i, 6 * j, 6, 6).array() == 0.0).all());
        EXPECT_TRUE((B[j].middleRows(6 * i, 6).array() == 0.0).all());
      }
    }
  }
}

TEST(Linearize, LinearToyLinearizesToItself) {
  // Double integrator with one player; the discrete transition is known.
  const double dt = 0.2;
  LqApproximation model;
  model.dynamics.resize(3);
  for (auto& d : model.dynamics) {
    d.A = Matrix{{1.0, dt}, {0.0, 1.0}};
    d.B = {Matrix{{0.5 * dt * dt}, {dt}}};
  }
  model.costs.assign(4, std::vector<QuadraticCostStage>(1));
  for (std::size_t k = 0; k <= 3; ++k) {
    model.costs[k][0].Q = Matrix::Identity(2, 2);
    model.costs[k][0].q = Vector::Zero(2);
    if (k < 3) {
      model.costs[k][0].R = {Matrix::Identity(1, 1)};
      model.costs[k][0].r = {Vector::Zero(1)};
    }
  }
  const LinearQuadraticGame g(model, {2});
  Matrix A;
  std::vector<Matrix> B;
  g.linearize(1, Vector{{3.0, -1.0}}, std::vector<Vector>{Vector::Constant(1, 2.0)}, A, B);
  EXPECT_EQ(A, (Matrix{{1.0, dt}, {0.0, 1.0}}));
  EXPECT_EQ(B[0], (Matrix{{0.5 * dt * dt}, {dt}}));
}

TEST(Integration, Rk4IsFourthOrder) {
  const Track t({{2000.0, 0.01, 10.0, 10.0}});
  const PlayerVector x0 = PlayerState{0.0, 15.0, 0.5, 0.02, 0.5, -0.3}.to_vector();
  const InputVector u(0.3, -0.2);
  const double T = 4.0;
  auto integrate = [&](double dt) {
    PlayerVector x = x0;
    const int steps = static_cast<int>(std::lround(T / dt));
    for (int k = 0; k < steps; ++k) x = step_player(x, u, t, dt);
    return x;
  };
  std::vector<double> errors;
  for (double dt : {0.4, 0.2, 0.1}) {
    errors.push_back((integrate(dt) - integrate(dt / 100.0)).cwiseAbs().maxCoeff());
  }
  for (std::size_t i = 1; i < errors.size(); ++i) {
    EXPECT_GE(std::log2(errors[i - 1] / errors[i]), 3.5);
  }
}

TEST(GGDiamond, LinearTable) {
  const GGDiamond gg = GGDiamond::linear(5.0, 20.0, 12.0);
  EXPECT_DOUBLE_EQ(gg.ax_max()(0.0), 5.0);
  EXPECT_DOUBLE_EQ(gg.ax_max()(10.0), 2.5);
  EXPECT_DOUBLE_EQ(gg.ax_max()(20.0), 0.0);
  EXPECT_DOUBLE_EQ(gg.ax_max()(30.0), 0.0);
  EXPECT_DOUBLE_EQ(gg.rho()(17.0), 12.0);
  EXPECT_DOUBLE_EQ(gg.v_max(), 20.0);
  EXPECT_DOUBLE_EQ(gg.ax_max().eval(10.0).second, -0.25);
}

TEST(GGDiamond, RejectsInvalidTables) {
  EXPECT_THROW(GGDiamond(PiecewiseLinear({{0, 3}, {10, 4}, {20, 0}}), PiecewiseLinear::constant(5)),
               std::invalid_argument);
  EXPECT_THROW(GGDiamond(PiecewiseLinear({{0, 3}, {20, 1}}), PiecewiseLinear::constant(5)),
               std::invalid_argument);
  EXPECT_THROW(GGDiamond(PiecewiseLinear({{0, 3}, {20, 0}}), PiecewiseLinear::constant(-1)),
               std::invalid_argument);
  EXPECT_THROW(PiecewiseLinear({{0, 1}, {0, 2}}), std::invalid_argument);
}
