#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

using namespace ilqgame;

namespace {

RacingGame duel(double dt = 0.1) {
  CostParams c = testutil::racing_params();
  c.R_input = Eigen::Matrix2d{{0.1, 0.0}, {0.0, 0.1}};
  return RacingGame(Track::straight(600, 7, 7),
                    {RacingPlayer{c, GGDiamond::linear(5, 20, 12)},
                     RacingPlayer{c, GGDiamond::linear(5, 25, 12)}},
                    dt);
}

Vector duel_start() {
  return pack_joint(std::vector{PlayerState{30, 20, 0, 0, 0, 0}, PlayerState{15, 23, 2, 0, 0, 0}});
}

std::vector<StageInputs> random_inputs(std::size_t K, std::size_t N, Eigen::Index m,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StageInputs> u(K, StageInputs(N));
  for (auto& stage : u) {
    for (auto& v : stage) {
      v.resize(m);
      for (auto& x : v) x = testutil::uniform(rng, -1, 1);
    }
  }
  return u;
}

StrategySet random_strategies(std::size_t K, std::size_t N, Eigen::Index m, Eigen::Index n,
                              std::uint64_t seed, bool zero_offsets) {
  std::mt19937_64 rng(seed);
  StrategySet s;
  s.laws.assign(K, std::vector<AffineLaw>(N));
  for (auto& stage : s.laws) {
    for (auto& law : stage) {
      law.gain = detail::random_matrix(rng, m, n, 0.3);
      law.offset = zero_offsets ? Vector(Vector::Zero(m)) : Vector(detail::random_matrix(rng, m, 1, 1.0));
    }
  }
  return s;
}

LinearQuadraticGame lq_game(std::size_t N, std::uint64_t seed) {
  return random_lq_game({.num_players = N, .state_dim_per_player = 2, .input_dim = 2,
                         .horizon = 12, .seed = seed, .cross_input_terms = true});
}

Vector lq_start(const LinearQuadraticGame& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return detail::random_matrix(rng, g.state_dim(), 1, 1.0);
}

}  // namespace

TEST(ForwardPass, ZeroFeedforwardReproducesNominal) {
  const RacingGame g = duel();
  const auto nominal = rollout(g, duel_start(), random_inputs(30, 2, 2, 1));
  const auto s = random_strategies(30, 2, 2, 12, 2, true);
  const auto out = forward_pass(g, nominal, s, 0.7);
  EXPECT_EQ(out.states, nominal.states);
  EXPECT_EQ(out.inputs, nominal.inputs);
}

TEST(ForwardPass, ZeroStepReproducesNominal) {
  const RacingGame g = duel();
  const auto nominal = rollout(g, duel_start(), random_inputs(30, 2, 2, 3));
  const auto s = random_strategies(30, 2, 2, 12, 4, false);
  const auto out = forward_pass(g, nominal, s, 0.0);
  EXPECT_EQ(out.states, nominal.states);
}

TEST(ForwardPass, OpenLoopIgnoresGains) {
  const RacingGame g = duel();
  const auto nominal = rollout(g, duel_start(), random_inputs(20, 2, 2, 5));
  auto s = random_strategies(20, 2, 2, 12, 6, false);
  s.type = EquilibriumType::kOpenLoop;
  const auto out = forward_pass(g, nominal, s, 0.5);
  for (std::size_t k = 0; k < 20; ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(out.inputs[k][i], Vector(nominal.inputs[k][i] - 0.5 * s(k, i).offset));
    }
  }
}

TEST(ForwardPass, LinearGameFullStepIsExactEquilibrium) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = lq_game(2, seed);
    const Vector x0 = lq_start(g, seed);
    const auto nominal = rollout(g, x0, random_inputs(g.horizon(), 2, 2, seed + 10));
    const auto strategies = solve_feedback_lq(lq_approximation(g, nominal));
    const auto out = forward_pass(g, nominal, strategies, 1.0);

    // Oracle: the feedback equilibrium of the absolute-coordinate model,
    // played from x0.
    const auto exact = strategy_rollout(g.model(), solve_feedback_lq(g.model()), x0);
    EXPECT_LE(max_abs_difference(out.states, exact.states), 1e-10);
  }
}

TEST(Solve, LinearGameFixedPointAfterOneIteration) {
  for (auto mode : {SolverMode::kFeedback, SolverMode::kOpenLoop}) {
    for (std::uint64_t seed : {4u, 5u}) {
      const auto g = lq_game(3, seed);
      const SolverSettings settings{.mode = mode, .eta = 1.0, .max_iterations = 10};
      const auto rep = solve(g, lq_start(g, seed), zero_inputs(g, g.horizon()), settings);
      ASSERT_TRUE(rep.converged);
      EXPECT_EQ(rep.iterations, 2u);
      EXPECT_LE(rep.change_norms[1], 1e-10);
    }
  }
}

TEST(Solve, SinglePlayerBaselineEqualsFeedback) {
  const RacingGame g(Track::straight(600, 7, 7),
                     {RacingPlayer{testutil::racing_params(), GGDiamond::linear(5, 20, 12)}}, 0.1);
  const Vector x0 = PlayerState{30, 18, 6.5, 0, 0, 0}.to_vector();
  SolverSettings fb;
  SolverSettings il = fb;
  il.mode = SolverMode::kIlqrBaseline;
  const auto a = solve(g, x0, zero_inputs(g, 40), fb);
  const auto b = solve(g, x0, zero_inputs(g, 40), il);
  ASSERT_TRUE(a.converged);
  EXPECT_LE(max_abs_difference(a.trajectory.states, b.trajectory.states), 1e-10);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Solve, BaselineOpponentFollowsPrediction) {
  const RacingGame g = duel();
  const Vector x0 = duel_start();
  const auto prediction = constant_velocity_prediction(x0, 40, g.dt());
  const SolverSettings s{.mode = SolverMode::kIlqrBaseline};
  const auto rep = solve(g, x0, zero_inputs(g, 40), s, &prediction);
  ASSERT_TRUE(rep.converged);
  for (std::size_t k = 0; k <= 40; ++k) {
    EXPECT_EQ(Vector(player_block(rep.trajectory.states[k], 1)), Vector(player_block(prediction[k], 1)));
  }
  EXPECT_GT(max_abs_difference(rep.trajectory.states, rollout(g, x0, zero_inputs(g, 40)).states), 0.1);
}

TEST(Solve, IsDeterministic) {
  const RacingGame g = duel();
  const SolverSettings s;
  const auto a = solve(g, duel_start(), zero_inputs(g, 30), s);
  const auto b = solve(g, duel_start(), zero_inputs(g, 30), s);
  EXPECT_EQ(a.trajectory.states, b.trajectory.states);
  EXPECT_EQ(a.change_norms, b.change_norms);
  EXPECT_EQ(a.iteration_costs, b.iteration_costs);
}

TEST(Solve, ChangeNormsAreRecomputableFromHistory) {
  const RacingGame g = duel();
  SolverSettings s{.mode = SolverMode::kOpenLoop};
  s.record_history = true;
  const auto rep = solve(g, duel_start(), zero_inputs(g, 30), s);
  ASSERT_EQ(rep.history.size(), rep.iterations + 1);
  for (std::size_t t = 0; t < rep.iterations; ++t) {
    EXPECT_EQ(rep.change_norms[t], max_abs_difference(rep.history[t + 1].states, rep.history[t].states));
    EXPECT_EQ(rep.iteration_costs[t], rep.history[t + 1].costs);
  }
  EXPECT_LT(rep.change_norms.back(), s.convergence_tol);
}

TEST(Solve, TrajectoryIsDynamicallyConsistent) {
  const RacingGame g = duel();
  const auto rep = solve(g, duel_start(), zero_inputs(g, 30), SolverSettings{});
  for (std::size_t k = 0; k < 30; ++k) {
    const Vector next = g.step(k, rep.trajectory.states[k], rep.trajectory.inputs[k]);
    EXPECT_LE((next - rep.trajectory.states[k + 1]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Solve, NonConvergenceIsReportedNotThrown) {
  const RacingGame g = duel();
  const SolverSettings s{.max_iterations = 2};
  const auto rep = solve(g, duel_start(), zero_inputs(g, 30), s);
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.iterations, 2u);
  EXPECT_EQ(rep.change_norms.size(), 2u);
}

TEST(Solve, InnerSolverErrorsCarryIteration) {
  LqApproximation model = random_lq_model({.num_players = 2, .state_dim_per_player = 1,
                                           .input_dim = 1, .horizon = 3, .seed = 1});
  for (auto& stage : model.costs) {
    for (auto& c : stage) {
      c.Q.setZero();
      for (auto& R : c.R) {
        if (R.size()) R.setZero();
      }
    }
  }
  const LinearQuadraticGame g(model, {1, 1});
  try {
    solve(g, Vector::Ones(2), zero_inputs(g, 3), SolverSettings{});
    FAIL() << "expected SolverSingularityError";
  } catch (const SolverSingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
    EXPECT_EQ(e.stage(), 2);
  }
}

TEST(Solve, RejectsInvalidSettings) {
  const RacingGame g = duel();
  EXPECT_THROW(solve(g, duel_start(), zero_inputs(g, 5), SolverSettings{.eta = 0.0}), std::invalid_argument);
  EXPECT_THROW(solve(g, duel_start(), zero_inputs(g, 5), SolverSettings{.eta = 1.5}), std::invalid_argument);
  EXPECT_THROW(solve(g, duel_start(), zero_inputs(g, 5), SolverSettings{.max_iterations = 0}),
               std::invalid_argument);
  EXPECT_THROW(solve(g, duel_start(), zero_inputs(g, 5), SolverSettings{.convergence_tol = 0.0}),
               std::invalid_argument);
}

TEST(SolverMode, StringRoundTrip) {
  for (auto m : {SolverMode::kFeedback, SolverMode::kOpenLoop, SolverMode::kIlqrBaseline}) {
    EXPECT_EQ(solver_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(solver_mode_from_string("stackelberg"), std::invalid_argument);
}

TEST(BestResponseGap, SinglePlayerHasNothingToGain) {
  const RacingGame g(Track::straight(600, 7, 7),
                     {RacingPlayer{testutil::racing_params(), GGDiamond::linear(5, 20, 12)}}, 0.1);
  const Vector x0 = PlayerState{30, 18, 6.5, 0, 0, 0}.to_vector();
  const SolverSettings s;
  const auto rep = solve(g, x0, zero_inputs(g, 40), s);
  const auto gap = best_response_gap(g, rep.trajectory, 0, s);
  EXPECT_TRUE(gap.verified);
  EXPECT_LE(std::abs(gap.relative), 1e-6);
}

TEST(BestResponseGap, OpenLoopSolutionOfLinearGameIsCertified) {
  for (std::uint64_t seed : {6u, 7u, 8u}) {
    const auto g = lq_game(3, seed);
    const SolverSettings s{.mode = SolverMode::kOpenLoop, .eta = 1.0, .max_iterations = 10, .convergence_tol = 1e-9};
    const auto rep = solve(g, lq_start(g, seed), zero_inputs(g, g.horizon()), s);
    ASSERT_TRUE(rep.converged);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto gap = best_response_gap(g, rep.trajectory, i, s);
      EXPECT_TRUE(gap.verified);
      EXPECT_LE(std::abs(gap.relative), 1e-8) << "seed " << seed << " player " << i;
    }
  }
}

TEST(BestResponseGap, DetectsPerturbedRacingSolution) {
  const RacingGame g = duel();
  const SolverSettings s{.mode = SolverMode::kOpenLoop};
  const auto rep = solve(g, duel_start(), zero_inputs(g, 30), s);
  ASSERT_TRUE(rep.converged);
  const auto base = best_response_gap(g, rep.trajectory, 0, s);

  auto inputs = rep.trajectory.inputs;
  inputs[10][0](kJy) += 0.5;
  const auto perturbed = rollout(g, duel_start(), inputs);
  const auto gap = best_response_gap(g, perturbed, 0, s);
  EXPECT_TRUE(gap.verified);
  EXPECT_GT(gap.gap, 1e-4);
  EXPECT_GT(gap.gap, 100.0 * std::abs(base.gap));
}
