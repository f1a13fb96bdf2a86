#pragma once

// Umbrella header: goal-conditioned DDPG/TD3 agents with hindsight
// experience replay, trained by a Kronecker-factored approximate
// natural-gradient optimizer (or the Adam baseline).

#include "tdhk/agent.hpp"
#include "tdhk/checkpoint.hpp"
#include "tdhk/config.hpp"
#include "tdhk/env.hpp"
#include "tdhk/errors.hpp"
#include "tdhk/harness.hpp"
#include "tdhk/kfac.hpp"
#include "tdhk/matrix.hpp"
#include "tdhk/mlp.hpp"
#include "tdhk/replay.hpp"
#include "tdhk/rng.hpp"
