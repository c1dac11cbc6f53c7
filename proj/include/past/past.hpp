#pragma once

// Umbrella header.

#include "past/assignment.hpp"
#include "past/benchmark.hpp"
#include "past/detector.hpp"
#include "past/disturbance.hpp"
#include "past/errors.hpp"
#include "past/geometry.hpp"
#include "past/harness.hpp"
#include "past/predictor.hpp"
#include "past/record_io.hpp"
#include "past/report.hpp"
#include "past/rng.hpp"
#include "past/scenario_io.hpp"
#include "past/scene.hpp"
#include "past/search.hpp"
#include "past/tracker.hpp"
