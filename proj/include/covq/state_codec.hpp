#pragma once

#include "covq/grid_env.hpp"
#include "covq/nn/tensor.hpp"

namespace covq {

// Channel order of the 4 x rows x cols observation tensor. Frozen; recorded
// in checkpoint metadata so saved weights stay interpretable.
enum StateChannel : int {
    kChannelObstacles = 0,
    kChannelCharging = 1,
    kChannelCurrent = 2,
    kChannelCovered = 3,
};
inline constexpr int kStateChannels = 4;
inline constexpr const char* kChannelOrder = "obstacles,charging,current,covered";

template <class T>
struct StateTensor {
    nn::Tensor<T> channels;  // [4, rows, cols], entries in {0, 1}
    T budget_scalar = T(0);  // budget_remaining / B; negative while violating
};

// Pure function of (map, state): the obstacle and charging channels depend
// only on the map, the current-location channel is one-hot, the covered
// channel is the visited mask.
template <class T>
StateTensor<T> encode(const GridMap& map, const EnvState& state, int budget_cap) {
    StateTensor<T> out;
    out.channels = nn::Tensor<T>({kStateChannels, map.rows(), map.cols()});
    for (int r = 0; r < map.rows(); ++r) {
        for (int c = 0; c < map.cols(); ++c) {
            const Coord p{r, c};
            if (map.at(p) == Cell::Obstacle) out.channels.at(kChannelObstacles, r, c) = T(1);
            if (map.at(p) == Cell::Charging) out.channels.at(kChannelCharging, r, c) = T(1);
            if (state.visited[map.index(p)]) out.channels.at(kChannelCovered, r, c) = T(1);
        }
    }
    out.channels.at(kChannelCurrent, state.position.row, state.position.col) = T(1);
    out.budget_scalar =
        budget_cap > 0 ? static_cast<T>(static_cast<double>(state.budget_remaining) /
                                        static_cast<double>(budget_cap))
                       : T(0);
    return out;
}

}  // namespace covq
