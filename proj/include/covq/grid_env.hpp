#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covq/errors.hpp"

namespace covq {

enum class Cell : uint8_t { Free, Obstacle, Charging };

// Fixed action order; the Q head and all masks index by this.
enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };
constexpr int kNumActions = 4;

struct Coord {
    int row = 0;
    int col = 0;
    bool operator==(const Coord&) const = default;
};

Coord neighbor(Coord c, Action a);

// Action that moves `from` to an orthogonally adjacent `to`, if any.
std::optional<Action> action_between(Coord from, Coord to);

// Static environment: cell classes, start station, dimensions. Immutable
// after construction. Maps are usually square (the network requires it) but
// the grid itself supports rows != cols for small search fixtures.
class GridMap {
public:
    GridMap(int rows, int cols, std::vector<Cell> cells, Coord start);

    // Text format: '.'=free, '#'=obstacle, 'C'=charging, 'S'=start (implies
    // charging); LF line endings, equal-length rows, exactly one 'S'.
    static GridMap parse(const std::string& text);
    std::string render() const;

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int cell_count() const { return rows_ * cols_; }
    bool square() const { return rows_ == cols_; }
    // Side length for square maps (the N of the 4xNxN state tensor).
    int side() const;

    bool in_bounds(Coord c) const {
        return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
    }
    Cell at(Coord c) const { return cells_[index(c)]; }
    bool passable(Coord c) const { return in_bounds(c) && at(c) != Cell::Obstacle; }
    int index(Coord c) const { return c.row * cols_ + c.col; }

    Coord start() const { return start_; }
    const std::vector<Cell>& cells() const { return cells_; }
    int obstacle_count() const;
    int charging_count() const;

    // FNV-1a hash of the canonical rendered text; identifies a map in
    // manifests and best-solution files.
    uint64_t text_hash() const;

    bool operator==(const GridMap&) const = default;

private:
    int rows_;
    int cols_;
    std::vector<Cell> cells_;
    Coord start_;
};

// Definition-1 reachable set: non-obstacle cells connected to some charging
// station through non-obstacle cells within floor(budget/2) moves.
// Multi-source BFS; result sorted row-major.
std::vector<Coord> reachable_cells(const GridMap& map, int budget);

// Dynamic rollout state. Plain value type; step() is pure.
struct EnvState {
    Coord position;
    int budget_remaining = 0;
    std::vector<uint8_t> visited;  // rows*cols
    int step = 0;
    int violations = 0;
    bool done = false;
    // Cached |visited ∩ target set|; maintained by Env::step.
    int covered_targets = 0;

    bool operator==(const EnvState&) const = default;
};

enum class TerminalReason { None, FullCoverage, StepCap };

struct StepOutcome {
    double reward = 0.0;
    bool new_cell_covered = false;
    // Arrival with negative post-decrement budget (any cell class). The
    // episode violation *counter* excludes charging-cell arrivals; this flag
    // does not, so feasibility checks can enforce br >= 0 along a path.
    bool violated = false;
    bool terminal = false;
    TerminalReason terminal_reason = TerminalReason::None;
};

// Reward constants.
inline constexpr double kRewardNewCell = 2.0;
inline constexpr double kRewardRevisit = -1.0;
inline constexpr double kRewardBudgetOk = 0.1;
inline constexpr double kRewardBudgetViolation = -3.0;
inline constexpr double kTerminationBonus = 200.0;

// Grid world with battery budget. Bundles the map, the budget cap B and the
// coverage target set (the Definition-1 reachable cells at B). All methods
// are pure functions of their arguments; the env holds no mutable state.
class Env {
public:
    Env(GridMap map, int budget_cap);

    const GridMap& map() const { return map_; }
    int budget_cap() const { return budget_cap_; }
    int episode_cap() const { return 10 * map_.rows() * map_.cols(); }

    const std::vector<uint8_t>& target_mask() const { return target_; }
    int target_count() const { return target_count_; }
    bool is_target(Coord c) const { return target_[map_.index(c)] != 0; }

    EnvState reset() const;

    // True iff the neighbor exists and is not an obstacle.
    std::array<bool, kNumActions> action_mask(const EnvState& s) const;

    std::pair<EnvState, StepOutcome> step(const EnvState& s, Action a) const;

    // Terminal condition of a state as-is (also meaningful right after
    // reset, where a degenerate single-cell target is already covered).
    TerminalReason terminal_reason(const EnvState& s) const;

    double coverage_fraction(const EnvState& s) const;

private:
    GridMap map_;
    int budget_cap_;
    std::vector<uint8_t> target_;
    int target_count_ = 0;
};

}  // namespace covq
