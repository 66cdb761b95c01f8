#pragma once

#include "ms2mp/benchmark.hpp"
#include "ms2mp/block_tridiagonal.hpp"
#include "ms2mp/environment.hpp"
#include "ms2mp/errors.hpp"
#include "ms2mp/export.hpp"
#include "ms2mp/factors.hpp"
#include "ms2mp/gauss_newton.hpp"
#include "ms2mp/gp_prior.hpp"
#include "ms2mp/kinematics.hpp"
#include "ms2mp/messages.hpp"
#include "ms2mp/planner.hpp"
#include "ms2mp/quadratic.hpp"
#include "ms2mp/scenario.hpp"
#include "ms2mp/scenario_io.hpp"
