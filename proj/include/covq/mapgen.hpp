#pragma once

#include "covq/grid_env.hpp"
#include "covq/rng.hpp"

namespace covq {

struct MapGenConfig {
    int n = 16;
    int stations = 3;          // charging cells including the start
    double obstacle_density = 0.1;
    uint64_t seed = 0;
    int validation_budget = -1;  // -1: 5n, the default experiment budget
    int max_attempts = 1000;
};

// Generates an n x n map: start station at (0,0), remaining stations at
// random free cells, obstacles as random rectangular blobs up to the
// requested density. Candidates are rejected until every free cell is
// reachable at the validation budget, so the default coverage target is the
// whole free area.
GridMap generate_map(const MapGenConfig& cfg);

}  // namespace covq
