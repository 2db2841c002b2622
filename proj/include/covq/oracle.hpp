#pragma once

#include <vector>

#include "covq/grid_env.hpp"

namespace covq {
namespace oracle {

// Brute-force ground truth for tiny instances. verify_reachable is an
// implementation of Definition-1 reachability that is deliberately
// independent of reachable_cells (simple-path enumeration instead of BFS);
// optimal_coverage searches for a shortest feasible coverage path using the
// environment's own step semantics.

struct OracleResult {
    bool feasible = false;
    int optimal_length = -1;           // moves, when feasible
    std::vector<Coord> witness_path;   // starts at the start station
};

// Per-cell check of Definition 1 by depth-limited enumeration of simple
// paths from each station. Maps larger than 64 cells are rejected.
std::vector<Coord> verify_reachable(const GridMap& map, int budget);

// Iterative-deepening search over (position, budget, covered-target-set)
// states, transitioning through Env::step so recharge and violation
// semantics are shared with the environment. Returns the minimum-length
// path that covers the full target set with budget never negative on
// arrival, or infeasible within max_len. Target sets larger than 12 cells
// are rejected. max_len < 0 selects the default 4 * |target set|.
OracleResult optimal_coverage(const Env& env, int max_len = -1);

}  // namespace oracle
}  // namespace covq
