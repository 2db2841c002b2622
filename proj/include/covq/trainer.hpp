#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covq/checkpoint.hpp"
#include "covq/grid_env.hpp"
#include "covq/qmodel.hpp"
#include "covq/replay.hpp"

namespace covq {

// Training runs in 32-bit reals; gradient verification instantiates the
// layer kit in double separately.
using Scalar = float;

struct TrainConfig {
    int episodes = 10000;
    // Headline tallies (full-coverage / no-violation / best counts) are
    // reported over at most this many leading episodes.
    int report_episodes = 7000;
    double gamma = 0.90;
    double lr = 0.001;
    int target_sync = 20;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_decay = 2100.0;
    int batch_size = 64;
    int buffer_capacity = 50000;
    int warmup = 1000;              // no updates until the buffer holds this many
    double per_alpha = 0.6;
    double per_beta_start = 0.4;
    double per_beta_end = 1.0;
    double priority_floor = 1e-6;
    bool update_per_episode = false;  // Algorithm-style cadence: one update per episode
    int update_every = 1;             // env steps between updates (per-action cadence)
    int burn_in_len = 0;              // recurrent warm-up from stored history
    std::string budget_spec = "5n";   // "4n" | "5n" | "6n" | integer
    uint64_t seed = 1;
    Variant variant = Variant::Recurrent;
    int hidden = 128;
    int checkpoint_every = 0;  // episodes between periodic snapshots; 0 = none

    int resolve_budget(const GridMap& map) const;
};

double epsilon_at(int episode, const TrainConfig& cfg);
double beta_at(int episode, const TrainConfig& cfg);

// Trailing mean with partial windows at the head.
std::vector<double> moving_average(const std::vector<double>& series, int window);

struct EpisodeRecord {
    int index = 0;
    int steps = 0;
    double coverage_pct = 0.0;
    int violations = 0;
    double total_reward = 0.0;
    double epsilon = 0.0;
    bool is_best = false;  // 100% coverage and zero violations
};

struct BestSolution {
    std::vector<Coord> path;  // starts at the start station
    double reward = 0.0;
    int episode = -1;
};

struct TrainResult {
    std::vector<EpisodeRecord> log;
    // Paths of every best episode, in episode order; `best` is the one with
    // the highest reward (the run's final solution).
    std::vector<BestSolution> best_episodes;
    std::optional<BestSolution> best;
    int target_sync_count = 0;
};

struct EvalResult {
    EpisodeRecord record;
    std::vector<Coord> path;
};

struct PathReplay {
    int steps = 0;
    double total_reward = 0.0;
    int violations = 0;
    double coverage_fraction = 0.0;
    bool full_coverage = false;
};

// Drives a recorded path through the environment; throws if the path is not
// a legal move sequence from the start station.
PathReplay replay_path(const Env& env, const std::vector<Coord>& path);

// Epsilon-greedy action choice. The forward pass advances the recurrent
// state in both branches, so exploration does not desynchronize the LSTM.
std::pair<int, nn::LstmState<Scalar>> select_action(QNetwork<Scalar>& net,
                                                    const StateTensor<Scalar>& state,
                                                    const nn::LstmState<Scalar>& hidden,
                                                    const std::array<bool, kNumActions>& mask,
                                                    double eps, Rng& rng);

// Double-DQN regression targets: Y = R for terminal transitions, otherwise
// R + gamma * Q_target(x', argmax_a Q_policy(x', a)) with the stored next
// mask applied to both the argmax and the lookup.
std::vector<double> td_target(const std::vector<const Transition<Scalar>*>& batch,
                              QNetwork<Scalar>& policy, QNetwork<Scalar>& target, double gamma);

using EpisodeCallback = std::function<void(const EpisodeRecord&)>;
using SnapshotCallback = std::function<void(int episode, QNetwork<Scalar>&)>;

class Trainer {
public:
    Trainer(Env env, TrainConfig cfg);

    TrainResult run(const EpisodeCallback& on_episode = {},
                    const SnapshotCallback& on_snapshot = {});

    // One prioritized minibatch update; returns the loss, or nothing while
    // the buffer is still warming up.
    std::optional<double> train_step(double beta);

    void sync_target();

    const Env& env() const { return env_; }
    const TrainConfig& config() const { return cfg_; }
    QNetwork<Scalar>& policy() { return policy_; }
    QNetwork<Scalar>& target() { return target_; }
    PriorityBuffer<Scalar>& buffer() { return buffer_; }
    Rng& rng() { return rng_; }

private:
    // Hidden state for a stored transition, rebuilt by replaying up to
    // burn_in_len chronologically preceding same-episode observations from
    // the ring; include_own also advances through the transition itself
    // (the hidden that precedes its next state).
    nn::LstmState<Scalar> burn_in_hidden(QNetwork<Scalar>& net, int index, bool include_own);

    Env env_;
    TrainConfig cfg_;
    Rng rng_;
    QNetwork<Scalar> policy_;
    QNetwork<Scalar> target_;
    PriorityBuffer<Scalar> buffer_;
    int64_t global_step_ = 0;
};

// Greedy rollout (eps = 0, fresh recurrent state); deterministic.
EvalResult evaluate(QNetwork<Scalar>& net, const Env& env);

}  // namespace covq
