#include "covq/oracle.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

namespace covq {
namespace oracle {

namespace {

// Enumerates simple paths of length <= depth_left from p, marking every cell
// reached. Exponential, which is fine under the 64-cell guard.
void enumerate_paths(const GridMap& map, Coord p, int depth_left,
                     std::vector<uint8_t>& on_path, std::vector<uint8_t>& reached) {
    reached[map.index(p)] = 1;
    if (depth_left == 0) return;
    for (int a = 0; a < kNumActions; ++a) {
        Coord q = neighbor(p, static_cast<Action>(a));
        if (!map.passable(q)) continue;
        if (on_path[map.index(q)]) continue;
        on_path[map.index(q)] = 1;
        enumerate_paths(map, q, depth_left - 1, on_path, reached);
        on_path[map.index(q)] = 0;
    }
}

struct CoverageSearch {
    const Env& env;
    std::vector<int> target_bit;       // cell index -> bit position or -1
    uint32_t full_mask = 0;
    std::unordered_map<uint64_t, int> seen_depth;
    std::vector<Coord> path;

    explicit CoverageSearch(const Env& e) : env(e), target_bit(e.map().cell_count(), -1) {
        int bit = 0;
        const auto& mask = e.target_mask();
        for (int i = 0; i < e.map().cell_count(); ++i) {
            if (mask[i]) {
                target_bit[i] = bit;
                full_mask |= 1u << bit;
                ++bit;
            }
        }
    }

    uint64_t key(const EnvState& s, uint32_t covered) const {
        return (static_cast<uint64_t>(covered) << 20) |
               (static_cast<uint64_t>(env.map().index(s.position)) << 8) |
               static_cast<uint64_t>(s.budget_remaining);
    }

    bool dfs(const EnvState& s, uint32_t covered, int depth_left) {
        if (covered == full_mask) return true;
        if (depth_left == 0 || s.done) return false;
        auto [it, inserted] = seen_depth.try_emplace(key(s, covered), depth_left);
        if (!inserted) {
            if (it->second >= depth_left) return false;
            it->second = depth_left;
        }
        const auto mask = env.action_mask(s);
        for (int a = 0; a < kNumActions; ++a) {
            if (!mask[a]) continue;
            auto [next, out] = env.step(s, static_cast<Action>(a));
            if (out.violated) continue;  // br must stay >= 0 along the path
            uint32_t next_covered = covered;
            const int bit = target_bit[env.map().index(next.position)];
            if (bit >= 0) next_covered |= 1u << bit;
            path.push_back(next.position);
            if (dfs(next, next_covered, depth_left - 1)) return true;
            path.pop_back();
        }
        return false;
    }
};

}  // namespace

std::vector<Coord> verify_reachable(const GridMap& map, int budget) {
    if (map.cell_count() > 64) {
        throw InstanceTooLargeError("verify_reachable is limited to 64 cells");
    }
    if (budget < 0) throw Error("budget must be non-negative");
    const int depth_cap = budget / 2;
    std::vector<uint8_t> reached(map.cell_count(), 0);
    std::vector<uint8_t> on_path(map.cell_count(), 0);
    for (int r = 0; r < map.rows(); ++r) {
        for (int c = 0; c < map.cols(); ++c) {
            Coord s{r, c};
            if (map.at(s) != Cell::Charging) continue;
            std::fill(on_path.begin(), on_path.end(), 0);
            on_path[map.index(s)] = 1;
            enumerate_paths(map, s, depth_cap, on_path, reached);
        }
    }
    std::vector<Coord> out;
    for (int r = 0; r < map.rows(); ++r) {
        for (int c = 0; c < map.cols(); ++c) {
            if (reached[map.index({r, c})]) out.push_back({r, c});
        }
    }
    return out;
}

OracleResult optimal_coverage(const Env& env, int max_len) {
    if (env.target_count() > 12) {
        throw InstanceTooLargeError("optimal_coverage is limited to 12 target cells");
    }
    if (max_len < 0) max_len = 4 * env.target_count();

    CoverageSearch search(env);
    EnvState initial = env.reset();
    uint32_t covered = 0;
    if (int bit = search.target_bit[env.map().index(initial.position)]; bit >= 0) {
        covered |= 1u << bit;
    }

    OracleResult result;
    if (covered == search.full_mask) {
        result.feasible = true;
        result.optimal_length = 0;
        result.witness_path = {initial.position};
        return result;
    }

    for (int limit = 1; limit <= max_len; ++limit) {
        search.seen_depth.clear();
        search.path.clear();
        search.path.push_back(initial.position);
        if (search.dfs(initial, covered, limit)) {
            result.feasible = true;
            result.optimal_length = static_cast<int>(search.path.size()) - 1;
            result.witness_path = search.path;
            return result;
        }
    }
    return result;
}

}  // namespace oracle
}  // namespace covq
