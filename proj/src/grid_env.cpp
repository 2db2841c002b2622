#include "covq/grid_env.hpp"

#include <algorithm>
#include <deque>

#include "covq/rng.hpp"

namespace covq {

Coord neighbor(Coord c, Action a) {
    switch (a) {
        case Action::Up: return {c.row - 1, c.col};
        case Action::Down: return {c.row + 1, c.col};
        case Action::Left: return {c.row, c.col - 1};
        case Action::Right: return {c.row, c.col + 1};
    }
    return c;
}

std::optional<Action> action_between(Coord from, Coord to) {
    for (int a = 0; a < kNumActions; ++a) {
        if (neighbor(from, static_cast<Action>(a)) == to) return static_cast<Action>(a);
    }
    return std::nullopt;
}

GridMap::GridMap(int rows, int cols, std::vector<Cell> cells, Coord start)
    : rows_(rows), cols_(cols), cells_(std::move(cells)), start_(start) {
    if (rows_ <= 0 || cols_ <= 0 || cells_.size() != static_cast<size_t>(rows_ * cols_)) {
        throw MapParseError(MapParseError::Kind::NonRectangular, "cell grid does not match rows x cols");
    }
    if (!in_bounds(start_)) {
        throw MapParseError(MapParseError::Kind::NoStart, "start cell out of bounds");
    }
    if (at(start_) != Cell::Charging) {
        throw MapParseError(MapParseError::Kind::StartNotCharging, "start cell is not a charging station");
    }
}

GridMap GridMap::parse(const std::string& text) {
    if (text.empty()) {
        throw MapParseError(MapParseError::Kind::NoStart, "empty map text");
    }
    std::vector<std::string> lines;
    std::string cur;
    for (char ch : text) {
        if (ch == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) lines.push_back(cur);  // trailing newline optional

    const int rows = static_cast<int>(lines.size());
    const int cols = rows > 0 ? static_cast<int>(lines[0].size()) : 0;
    if (rows == 0 || cols == 0) {
        throw MapParseError(MapParseError::Kind::NonRectangular, "map has no cells");
    }

    std::vector<Cell> cells;
    cells.reserve(static_cast<size_t>(rows) * cols);
    std::optional<Coord> start;
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(lines[r].size()) != cols) {
            throw MapParseError(MapParseError::Kind::NonRectangular,
                                "row " + std::to_string(r) + " has length " +
                                    std::to_string(lines[r].size()) + ", expected " + std::to_string(cols));
        }
        for (int c = 0; c < cols; ++c) {
            switch (lines[r][c]) {
                case '.': cells.push_back(Cell::Free); break;
                case '#': cells.push_back(Cell::Obstacle); break;
                case 'C': cells.push_back(Cell::Charging); break;
                case 'S':
                    if (start) {
                        throw MapParseError(MapParseError::Kind::MultipleStarts,
                                            "more than one 'S' cell");
                    }
                    start = Coord{r, c};
                    cells.push_back(Cell::Charging);
                    break;
                default:
                    throw MapParseError(MapParseError::Kind::UnknownCell,
                                        std::string("unknown cell character '") + lines[r][c] +
                                            "' at row " + std::to_string(r) + " col " + std::to_string(c));
            }
        }
    }
    if (!start) {
        throw MapParseError(MapParseError::Kind::NoStart, "no 'S' cell");
    }
    return GridMap(rows, cols, std::move(cells), *start);
}

std::string GridMap::render() const {
    std::string out;
    out.reserve(static_cast<size_t>(rows_) * (cols_ + 1));
    for (int r = 0; r < rows_; ++r) {
        for (int c = 0; c < cols_; ++c) {
            Coord p{r, c};
            char ch = '.';
            switch (at(p)) {
                case Cell::Free: ch = '.'; break;
                case Cell::Obstacle: ch = '#'; break;
                case Cell::Charging: ch = (p == start_) ? 'S' : 'C'; break;
            }
            out.push_back(ch);
        }
        out.push_back('\n');
    }
    return out;
}

int GridMap::side() const {
    if (!square()) throw Error("map is not square");
    return rows_;
}

int GridMap::obstacle_count() const {
    return static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::Obstacle));
}

int GridMap::charging_count() const {
    return static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::Charging));
}

uint64_t GridMap::text_hash() const {
    const std::string text = render();
    return fnv1a64(text.data(), text.size());
}

std::vector<Coord> reachable_cells(const GridMap& map, int budget) {
    if (budget < 0) throw Error("budget must be non-negative");
    const int depth_cap = budget / 2;
    std::vector<int> dist(map.cell_count(), -1);
    std::deque<Coord> frontier;
    for (int r = 0; r < map.rows(); ++r) {
        for (int c = 0; c < map.cols(); ++c) {
            Coord p{r, c};
            if (map.at(p) == Cell::Charging) {
                dist[map.index(p)] = 0;
                frontier.push_back(p);
            }
        }
    }
    while (!frontier.empty()) {
        Coord p = frontier.front();
        frontier.pop_front();
        const int d = dist[map.index(p)];
        if (d == depth_cap) continue;
        for (int a = 0; a < kNumActions; ++a) {
            Coord q = neighbor(p, static_cast<Action>(a));
            if (!map.passable(q)) continue;
            if (dist[map.index(q)] != -1) continue;
            dist[map.index(q)] = d + 1;
            frontier.push_back(q);
        }
    }
    std::vector<Coord> out;
    for (int r = 0; r < map.rows(); ++r) {
        for (int c = 0; c < map.cols(); ++c) {
            if (dist[map.index({r, c})] != -1) out.push_back({r, c});
        }
    }
    return out;
}

Env::Env(GridMap map, int budget_cap)
    : map_(std::move(map)), budget_cap_(budget_cap), target_(map_.cell_count(), 0) {
    if (budget_cap_ < 0) throw Error("budget cap must be non-negative");
    if (map_.charging_count() == 0) {
        throw MapParseError(MapParseError::Kind::NoStart, "map has no charging station");
    }
    for (Coord c : reachable_cells(map_, budget_cap_)) {
        target_[map_.index(c)] = 1;
        ++target_count_;
    }
}

EnvState Env::reset() const {
    EnvState s;
    s.position = map_.start();
    s.budget_remaining = budget_cap_;
    s.visited.assign(map_.cell_count(), 0);
    s.visited[map_.index(s.position)] = 1;
    s.covered_targets = is_target(s.position) ? 1 : 0;
    return s;
}

std::array<bool, kNumActions> Env::action_mask(const EnvState& s) const {
    std::array<bool, kNumActions> mask{};
    for (int a = 0; a < kNumActions; ++a) {
        mask[a] = map_.passable(neighbor(s.position, static_cast<Action>(a)));
    }
    return mask;
}

std::pair<EnvState, StepOutcome> Env::step(const EnvState& s, Action a) const {
    if (s.done) throw SteppedAfterDoneError("step called on a terminal state");
    const Coord arrival = neighbor(s.position, a);
    if (!map_.passable(arrival)) {
        throw MaskedActionError("action " + std::to_string(static_cast<int>(a)) +
                                " is masked at (" + std::to_string(s.position.row) + "," +
                                std::to_string(s.position.col) + ")");
    }

    EnvState next = s;
    next.position = arrival;
    next.budget_remaining -= 1;  // budget is spent before the reward looks at it

    const int idx = map_.index(arrival);
    const bool visited_before = next.visited[idx] != 0;
    const bool negative_budget = next.budget_remaining < 0;
    const bool charging = map_.at(arrival) == Cell::Charging;

    const double r_coverage = visited_before ? kRewardRevisit : kRewardNewCell;
    const double r_budget = negative_budget ? kRewardBudgetViolation : kRewardBudgetOk;
    double reward = (r_coverage + r_budget) / 2.0;

    if (negative_budget && !charging) next.violations += 1;
    if (charging) next.budget_remaining = budget_cap_;

    if (!visited_before) {
        next.visited[idx] = 1;
        if (target_[idx]) next.covered_targets += 1;
    }
    next.step += 1;

    StepOutcome out;
    out.new_cell_covered = !visited_before;
    out.violated = negative_budget;
    out.terminal_reason = terminal_reason(next);
    out.terminal = out.terminal_reason != TerminalReason::None;
    next.done = out.terminal;
    if (out.terminal_reason == TerminalReason::FullCoverage && next.violations == 0) {
        reward = kTerminationBonus;  // replaces, not adds to, the step reward
    }
    out.reward = reward;
    return {std::move(next), out};
}

TerminalReason Env::terminal_reason(const EnvState& s) const {
    if (s.covered_targets >= target_count_) return TerminalReason::FullCoverage;
    if (s.step >= episode_cap()) return TerminalReason::StepCap;
    return TerminalReason::None;
}

double Env::coverage_fraction(const EnvState& s) const {
    if (target_count_ == 0) return 1.0;
    return static_cast<double>(s.covered_targets) / target_count_;
}

}  // namespace covq
