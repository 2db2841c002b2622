#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "covq/qmodel.hpp"
#include "covq/rng.hpp"
#include "covq/state_codec.hpp"

namespace covq {

template <class T>
struct Transition {
    StateTensor<T> state;
    int action = 0;
    double reward = 0.0;
    StateTensor<T> next_state;
    std::array<bool, kNumActions> next_mask{};
    bool done = false;
};

// Binary sum tree; supports point update and prefix-sum descent in O(log n).
// Leaf storage is padded to a power of two so leaf i owns the i-th interval
// of the cumulative prefix line.
class SumTree {
public:
    explicit SumTree(int capacity) : capacity_(capacity), leaves_(1) {
        while (leaves_ < capacity) leaves_ *= 2;
        nodes_.assign(2 * static_cast<size_t>(leaves_), 0.0);
    }

    void set(int i, double p) {
        size_t node = static_cast<size_t>(leaves_ + i);
        nodes_[node] = p;
        for (node /= 2; node >= 1; node /= 2) {
            nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
        }
    }

    double get(int i) const { return nodes_[static_cast<size_t>(leaves_ + i)]; }
    double total() const { return nodes_[1]; }  // the lone leaf when leaves_ == 1

    // Leaf index whose cumulative range contains v in [0, total).
    int find_prefix(double v) const {
        if (leaves_ == 1) return 0;
        size_t node = 1;
        while (node < static_cast<size_t>(leaves_)) {
            const double left = nodes_[2 * node];
            if (v < left) {
                node = 2 * node;
            } else {
                v -= left;
                node = 2 * node + 1;
            }
        }
        return static_cast<int>(node) - leaves_;
    }

    int capacity() const { return capacity_; }

private:
    int capacity_;
    int leaves_;
    std::vector<double> nodes_;
};

struct SampleBatch {
    std::vector<int> indices;
    std::vector<double> weights;  // importance weights, normalized by the batch max
};

// Proportional prioritized replay over a ring buffer. Raw priorities are
// stored pre-alpha; the tree holds p^alpha. New items enter at the running
// maximum raw priority so they are sampled at least once.
template <class T>
class PriorityBuffer {
public:
    PriorityBuffer(int capacity, double alpha = 0.6, double priority_floor = 1e-6)
        : capacity_(capacity), alpha_(alpha), floor_(priority_floor), tree_(capacity) {
        data_.reserve(static_cast<size_t>(capacity));
    }

    void push(Transition<T> t) {
        const int idx = write_;
        if (size_ < capacity_) {
            data_.push_back(std::move(t));
            ++size_;
        } else {
            data_[static_cast<size_t>(idx)] = std::move(t);
        }
        tree_.set(idx, std::pow(max_priority_, alpha_));
        write_ = (write_ + 1) % capacity_;
    }

    SampleBatch sample(int m, double beta, Rng& rng) const {
        if (size_ < m) {
            throw InsufficientSamplesError("replay holds " + std::to_string(size_) +
                                           " transitions, need " + std::to_string(m));
        }
        SampleBatch batch;
        batch.indices.reserve(static_cast<size_t>(m));
        batch.weights.reserve(static_cast<size_t>(m));
        const double total = tree_.total();
        const double segment = total / m;  // stratified: one draw per equal-mass segment
        double max_w = 0.0;
        for (int k = 0; k < m; ++k) {
            const double v = (k + rng.uniform()) * segment;
            int idx = tree_.find_prefix(std::min(v, std::nextafter(total, 0.0)));
            if (idx >= size_) idx = size_ - 1;
            const double p = tree_.get(idx) / total;
            const double w = std::pow(static_cast<double>(size_) * p, -beta);
            batch.indices.push_back(idx);
            batch.weights.push_back(w);
            max_w = std::max(max_w, w);
        }
        for (double& w : batch.weights) w /= max_w;
        return batch;
    }

    void update_priorities(std::span<const int> indices, std::span<const double> td_errors) {
        for (size_t i = 0; i < indices.size(); ++i) {
            const int idx = indices[i];
            if (idx < 0 || idx >= size_) {
                throw IndexOutOfRangeError("priority update index " + std::to_string(idx));
            }
            const double raw = std::abs(td_errors[i]) + floor_;
            tree_.set(idx, std::pow(raw, alpha_));
            max_priority_ = std::max(max_priority_, raw);
        }
    }

    const Transition<T>& at(int i) const { return data_[static_cast<size_t>(i)]; }
    int size() const { return size_; }
    int capacity() const { return capacity_; }
    double max_priority() const { return max_priority_; }
    double tree_total() const { return tree_.total(); }
    double leaf(int i) const { return tree_.get(i); }

    // Chronological predecessor of slot i, if it still holds an older
    // transition (used to warm the recurrent state from stored history).
    std::optional<int> prev_index(int i) const {
        if (size_ < capacity_) {
            return i > 0 ? std::optional<int>(i - 1) : std::nullopt;
        }
        if (i == write_) return std::nullopt;  // i is the oldest slot
        return (i - 1 + capacity_) % capacity_;
    }

private:
    int capacity_;
    double alpha_, floor_;
    std::vector<Transition<T>> data_;
    int write_ = 0;
    int size_ = 0;
    SumTree tree_;
    double max_priority_ = 1.0;
};

}  // namespace covq
