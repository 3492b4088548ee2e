#pragma once

#include "ktree/env.hpp"
#include "ktree/rng.hpp"
#include "ktree/trajectory.hpp"
#include "ktree/tree.hpp"

namespace ktree {

// Direct simulator of the trap model on a finite tree: exponential holds of
// mean gamma_k(x), jump targets chosen by the coin-tossing walk up the
// ancestry followed by uniform redraws of the released coordinates.
//
// RNG consumption order per step is fixed for reproducibility:
//   hold time, then one uniform per coin flip (from level k-1 downward),
//   then one uniform per redrawn coordinate (top-down). Self-jumps are
//   recorded as events.

// One jump from a leaf: flips the ancestry coins until tails (the root coin
// always comes up tails), keeps coordinates 1..g, redraws the rest uniformly.
// kept_generation, when given, receives the drawn g.
VertexAddress sample_jump_target(const VertexAddress& current, const Environment& env,
                                 RandomSource& rng, std::size_t* kept_generation = nullptr);

Trajectory simulate_coin(const Environment& env, const VertexAddress& start, double horizon,
                         RandomSource& rng);

// Same dynamics, stopping after a fixed number of jumps instead of a time
// horizon (trajectory horizon is set to the last jump time).
Trajectory simulate_coin_jumps(const Environment& env, const VertexAddress& start,
                               std::size_t jumps, RandomSource& rng);

} // namespace ktree
