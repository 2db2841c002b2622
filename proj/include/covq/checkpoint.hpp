#pragma once

#include <string>

#include "covq/qmodel.hpp"

namespace covq {

// Checkpoint file: little-endian binary, magic "CBQN", format version u32,
// a JSON metadata block (network geometry, variant tag, channel order,
// budget cap), then per-parameter records (name length + UTF-8 name, rank,
// dims, raw 32-bit reals row-major) covering learnable parameters and
// batch-norm running statistics, and a trailing FNV-1a checksum of
// everything before it.

struct CheckpointMeta {
    Variant variant = Variant::Recurrent;
    int rows = 0;
    int cols = 0;
    int kernel = 0;
    int conv_channels = 0;
    int hidden = 0;
    int actions = kNumActions;
    int budget_cap = 0;

    QNetworkConfig network_config() const {
        QNetworkConfig cfg;
        cfg.rows = rows;
        cfg.cols = cols;
        cfg.kernel = kernel;
        cfg.conv_channels = conv_channels;
        cfg.hidden = hidden;
        cfg.actions = actions;
        cfg.variant = variant;
        return cfg;
    }
};

void save_checkpoint(const std::string& path, QNetwork<float>& net, int budget_cap);

// Reads only the header. Throws IoError / ChecksumMismatchError.
CheckpointMeta peek_checkpoint(const std::string& path);

// Loads parameters into an already-constructed network whose geometry must
// match the file. Throws VariantMismatchError when the stored variant
// differs from the network's.
CheckpointMeta load_checkpoint(const std::string& path, QNetwork<float>& net);

// Convenience: construct the network described by the file and fill it.
std::pair<QNetwork<float>, CheckpointMeta> load_checkpoint_network(const std::string& path);

}  // namespace covq
