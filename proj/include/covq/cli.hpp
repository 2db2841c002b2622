#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covq/trainer.hpp"

namespace covq {
namespace cli {

// Command implementations live here so they can be exercised directly by
// tests; tools/covq_main.cpp only parses flags and maps exceptions to exit
// codes.

struct MapgenOptions {
    int n = 16;
    int stations = 3;
    double density = 0.1;
    uint64_t seed = 0;
    int validation_budget = -1;
    std::string out_path;
};

struct TrainOptions {
    std::string map_path;
    std::string config_path;    // optional; defaults apply when empty
    std::string from_manifest;  // optional; re-run a previous manifest
    std::string out_dir;
    // command-line overrides
    std::optional<uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::string> budget;
    std::optional<int> episodes;
    bool quiet = false;
};

struct EvalOptions {
    std::string checkpoint_path;
    std::string map_path;
    std::string out_path;  // path JSON; optional
    std::optional<std::string> budget;
    std::optional<std::string> variant;  // expected variant, verified
    uint64_t seed = 0;                   // accepted for interface symmetry; greedy rollouts ignore it
};

struct CompareOptions {
    std::string manifest_a;
    std::string manifest_b;
};

int cmd_mapgen(const MapgenOptions& opts);
int cmd_train(const TrainOptions& opts);
int cmd_eval(const EvalOptions& opts);
int cmd_compare(const CompareOptions& opts);

// Flat key=value config text with '#' comments. Unknown keys and malformed
// values raise ConfigError with the line number.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg);
void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value,
                     int line = 0);

// Metrics CSV. Header is fixed: episode,steps,coverage_pct,violations,
// reward,epsilon,is_best. Reals carry six decimal places, rows end in LF.
std::string metrics_csv_header();
std::string metrics_csv_row(const EpisodeRecord& rec);
std::vector<EpisodeRecord> read_metrics_csv(const std::string& path);

struct RunSummary {
    int episodes = 0;
    int window = 0;  // leading episodes the tallies cover
    int full_coverage = 0;
    int zero_violation = 0;
    int best = 0;
    std::optional<double> max_best_reward;
};
RunSummary summarize(const std::vector<EpisodeRecord>& log, int report_episodes);

}  // namespace cli
}  // namespace covq
