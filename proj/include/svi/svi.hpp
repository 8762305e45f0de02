#pragma once

#include "svi/errors.hpp"
#include "svi/convex.hpp"
#include "svi/paths.hpp"
#include "svi/coefficients.hpp"
#include "svi/models.hpp"
#include "svi/solver.hpp"
#include "svi/stats.hpp"
#include "svi/parallel.hpp"
#include "svi/experiments.hpp"
#include "svi/config.hpp"
#include "svi/runner.hpp"
