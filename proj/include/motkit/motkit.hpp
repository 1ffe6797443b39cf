// Umbrella header for the whole library.
#pragma once

#include "motkit/adam.hpp"
#include "motkit/assignment.hpp"
#include "motkit/bank.hpp"
#include "motkit/config.hpp"
#include "motkit/core.hpp"
#include "motkit/embed.hpp"
#include "motkit/feature_map.hpp"
#include "motkit/gradcheck.hpp"
#include "motkit/io.hpp"
#include "motkit/kalman.hpp"
#include "motkit/losses.hpp"
#include "motkit/metrics.hpp"
#include "motkit/rng.hpp"
#include "motkit/sim.hpp"
#include "motkit/tracker.hpp"
#include "motkit/trainer.hpp"
