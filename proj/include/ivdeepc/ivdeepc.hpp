#pragma once

// Umbrella header: data-enabled predictive control with instrumental
// variables, plus the nominal, subspace-predictor, and random-averaging
// variants, a certified dense QP solver, and the Monte-Carlo experiment
// harness.

#include "rng.hpp"
#include "lti_sim.hpp"
#include "hankel.hpp"
#include "predictor.hpp"
#include "qp_solver.hpp"
#include "controller.hpp"
#include "experiments.hpp"
