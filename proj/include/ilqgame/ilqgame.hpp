#pragma once

#include "ilqgame/core.hpp"
#include "ilqgame/export.hpp"
#include "ilqgame/game.hpp"
#include "ilqgame/ilq_solver.hpp"
#include "ilqgame/linear_quadratic_game.hpp"
#include "ilqgame/lq_game.hpp"
#include "ilqgame/nash_check.hpp"
#include "ilqgame/racing_costs.hpp"
#include "ilqgame/racing_game.hpp"
#include "ilqgame/runner.hpp"
#include "ilqgame/scenario.hpp"
#include "ilqgame/track.hpp"
#include "ilqgame/vehicle_dynamics.hpp"
