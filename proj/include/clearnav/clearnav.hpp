#pragma once

#include "clearnav/dynamics.hpp"
#include "clearnav/world.hpp"
#include "clearnav/mmd_risk.hpp"
#include "clearnav/collision_model.hpp"
#include "clearnav/training.hpp"
#include "clearnav/planner.hpp"
#include "clearnav/scenarios.hpp"
#include "clearnav/bench.hpp"
#include "clearnav/io.hpp"
