#pragma once

// Umbrella header: fairness-constrained online learning on task streams
// with a disentangled semantic/variation representation, plus the
// evaluation harness (group metrics, comparator oracles, regret reports).

#include "fairdolce/autodiff.hpp"
#include "fairdolce/comparator.hpp"
#include "fairdolce/core.hpp"
#include "fairdolce/csv.hpp"
#include "fairdolce/data.hpp"
#include "fairdolce/experiment.hpp"
#include "fairdolce/learner.hpp"
#include "fairdolce/linalg.hpp"
#include "fairdolce/losses.hpp"
#include "fairdolce/metrics.hpp"
#include "fairdolce/nn.hpp"
#include "fairdolce/rng.hpp"
#include "fairdolce/sampler.hpp"
