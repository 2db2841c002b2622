#include "covq/mapgen.hpp"

#include <algorithm>

namespace covq {

GridMap generate_map(const MapGenConfig& cfg) {
    if (cfg.n < 4) throw GenerationFailedError("map side must be at least 4");
    if (cfg.obstacle_density < 0.0 || cfg.obstacle_density > 0.4) {
        throw GenerationFailedError("obstacle density must lie in [0, 0.4]");
    }
    if (cfg.stations < 1) throw GenerationFailedError("need at least one station");

    const int n = cfg.n;
    const int budget = cfg.validation_budget >= 0 ? cfg.validation_budget : 5 * n;
    const int obstacle_target = static_cast<int>(cfg.obstacle_density * n * n);
    Rng rng(cfg.seed);

    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        std::vector<Cell> cells(static_cast<size_t>(n) * n, Cell::Free);
        auto at = [&](int r, int c) -> Cell& { return cells[static_cast<size_t>(r) * n + c]; };

        // Rectangular obstacle blobs, never on the start corner.
        int placed = 0;
        int guard = 0;
        while (placed < obstacle_target && guard++ < 200) {
            const int bh = 1 + rng.uniform_int(std::max(1, n / 4));
            const int bw = 1 + rng.uniform_int(std::max(1, n / 4));
            const int r0 = rng.uniform_int(n - bh + 1);
            const int c0 = rng.uniform_int(n - bw + 1);
            for (int r = r0; r < r0 + bh && placed < obstacle_target; ++r) {
                for (int c = c0; c < c0 + bw && placed < obstacle_target; ++c) {
                    if (r == 0 && c == 0) continue;
                    if (at(r, c) != Cell::Obstacle) {
                        at(r, c) = Cell::Obstacle;
                        ++placed;
                    }
                }
            }
        }

        at(0, 0) = Cell::Charging;  // robot starts from the (0,0) corner
        int stations = 1;
        guard = 0;
        while (stations < cfg.stations && guard++ < 1000) {
            const int r = rng.uniform_int(n);
            const int c = rng.uniform_int(n);
            if (at(r, c) == Cell::Free) {
                at(r, c) = Cell::Charging;
                ++stations;
            }
        }
        if (stations < cfg.stations) continue;

        GridMap map(n, n, cells, Coord{0, 0});
        const auto reachable = reachable_cells(map, budget);
        const int free_cells = n * n - map.obstacle_count();
        if (static_cast<int>(reachable.size()) == free_cells) return map;
    }
    throw GenerationFailedError("no valid map after " + std::to_string(cfg.max_attempts) +
                                " attempts; lower the density or raise the budget");
}

}  // namespace covq
