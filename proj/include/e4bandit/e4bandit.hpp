#pragma once

// Umbrella header.

#include "e4bandit/linalg.hpp"
#include "e4bandit/env.hpp"
#include "e4bandit/design.hpp"
#include "e4bandit/estimator.hpp"
#include "e4bandit/allocation.hpp"
#include "e4bandit/algorithms.hpp"
#include "e4bandit/harness.hpp"
