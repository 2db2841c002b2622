#include <doctest.h>

#include <cmath>
#include <map>

#include "covq/replay.hpp"
#include "test_util.hpp"

using namespace covq;

namespace {

Transition<double> tagged(double reward) {
    Transition<double> t;
    t.state.channels = nn::Tensor<double>({4, 1, 1});
    t.next_state.channels = nn::Tensor<double>({4, 1, 1});
    t.reward = reward;
    t.next_mask = {true, true, true, true};
    return t;
}

}  // namespace

TEST_CASE("sum tree stays consistent under random operations") {
    Rng rng(1);
    for (const int cap : {1, 2, 5, 8, 37}) {
        SumTree tree(cap);
        std::vector<double> leaves(static_cast<size_t>(cap), 0.0);
        for (int op = 0; op < 10000; ++op) {
            const int i = rng.uniform_int(cap);
            const double p = rng.uniform(0.0, 4.0);
            tree.set(i, p);
            leaves[static_cast<size_t>(i)] = p;
            if (op % 997 == 0) {
                double sum = 0.0;
                for (double v : leaves) sum += v;
                CHECK(tree.total() == doctest::Approx(sum).epsilon(1e-9));
            }
        }
        // descent lands on the right leaf for every prefix bucket
        double cum = 0.0;
        for (int i = 0; i < cap; ++i) {
            if (leaves[static_cast<size_t>(i)] > 0.0) {
                CHECK(tree.find_prefix(cum + leaves[static_cast<size_t>(i)] / 2) == i);
            }
            cum += leaves[static_cast<size_t>(i)];
        }
    }
}

TEST_CASE("push semantics") {
    PriorityBuffer<double> buf(3);
    buf.push(tagged(0.0));
    CHECK(buf.size() == 1);
    CHECK(buf.tree_total() == 1.0);  // initial priority rule

    buf.push(tagged(1.0));
    buf.push(tagged(2.0));
    buf.push(tagged(3.0));  // evicts the oldest
    CHECK(buf.size() == 3);
    std::vector<double> rewards;
    for (int i = 0; i < 3; ++i) rewards.push_back(buf.at(i).reward);
    std::sort(rewards.begin(), rewards.end());
    CHECK(rewards == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("root equals a linear rescan after interleaved pushes and updates") {
    Rng rng(2);
    PriorityBuffer<double> buf(64);
    for (int op = 0; op < 5000; ++op) {
        if (buf.size() == 0 || rng.uniform() < 0.35) {
            buf.push(tagged(rng.uniform()));
        } else {
            const int idx = rng.uniform_int(buf.size());
            const double td = rng.uniform(0.0, 3.0);
            buf.update_priorities(std::array{idx}, std::array{td});
        }
        if (op % 511 == 0) {
            double sum = 0.0;
            for (int i = 0; i < buf.size(); ++i) sum += buf.leaf(i);
            CHECK(buf.tree_total() == doctest::Approx(sum).epsilon(1e-9));
        }
    }
}

TEST_CASE("uniform priorities sample uniformly") {
    Rng rng(3);
    const int n = 32;
    PriorityBuffer<double> buf(n);
    for (int i = 0; i < n; ++i) buf.push(tagged(i));

    std::vector<double> counts(n, 0.0);
    const int draws = 100000;
    const int m = 8;
    for (int k = 0; k < draws / m; ++k) {
        const SampleBatch b = buf.sample(m, 0.4, rng);
        for (int idx : b.indices) counts[static_cast<size_t>(idx)] += 1.0;
    }
    const std::vector<double> expected(n, static_cast<double>(draws) / n);
    CHECK(testutil::chi_square_pvalue(counts, expected) > 0.01);
}

TEST_CASE("a dominant priority dominates the batches") {
    Rng rng(4);
    const int n = 16;
    PriorityBuffer<double> buf(n, /*alpha=*/1.0);
    for (int i = 0; i < n; ++i) buf.push(tagged(i));
    std::vector<int> indices(n);
    std::vector<double> tds(n, 1e-6);
    for (int i = 0; i < n; ++i) indices[i] = i;
    tds[5] = 1.0;  // ~1e6 ratio against the floor-dominated rest
    buf.update_priorities(indices, tds);

    int batches_with_dominant = 0;
    const int trials = 1000;
    for (int k = 0; k < trials; ++k) {
        const SampleBatch b = buf.sample(4, 1.0, rng);
        for (int idx : b.indices) {
            if (idx == 5) {
                ++batches_with_dominant;
                break;
            }
        }
    }
    CHECK(batches_with_dominant >= 990);
}

TEST_CASE("beta one with uniform priorities gives unit weights") {
    Rng rng(5);
    PriorityBuffer<double> buf(8);
    for (int i = 0; i < 8; ++i) buf.push(tagged(i));
    const SampleBatch b = buf.sample(8, 1.0, rng);
    for (double w : b.weights) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("updates shift the sampling distribution and respect the floor") {
    Rng rng(6);
    PriorityBuffer<double> buf(16, 0.6, 1e-6);
    for (int i = 0; i < 16; ++i) buf.push(tagged(i));

    std::vector<int> indices(16);
    std::vector<double> tds(16, 0.0);
    for (int i = 0; i < 16; ++i) indices[i] = i;
    buf.update_priorities(indices, tds);  // all zero TD: floor everywhere
    for (int i = 0; i < 16; ++i) {
        CHECK(buf.leaf(i) == doctest::Approx(std::pow(1e-6, 0.6)).epsilon(1e-9));
    }

    tds[3] = 2.0;
    tds[11] = 1.0;
    buf.update_priorities(indices, tds);
    std::map<int, int> hits;
    for (int k = 0; k < 2000; ++k) {
        for (int idx : buf.sample(4, 0.5, rng).indices) hits[idx]++;
    }
    CHECK(hits[3] > hits[11]);
    CHECK(hits[11] > hits[0] + hits[1] + hits[2]);
}

TEST_CASE("error paths") {
    Rng rng(7);
    PriorityBuffer<double> buf(8);
    buf.push(tagged(0));
    CHECK_THROWS_AS(buf.sample(2, 0.4, rng), InsufficientSamplesError);
    CHECK_THROWS_AS(buf.update_priorities(std::array{5}, std::array{1.0}),
                    IndexOutOfRangeError);
}

TEST_CASE("chronological predecessors honor ring boundaries") {
    PriorityBuffer<double> buf(4);
    buf.push(tagged(0));
    buf.push(tagged(1));
    CHECK_FALSE(buf.prev_index(0).has_value());
    CHECK(buf.prev_index(1) == 0);

    buf.push(tagged(2));
    buf.push(tagged(3));
    buf.push(tagged(4));  // overwrites slot 0; oldest is now slot 1
    CHECK_FALSE(buf.prev_index(1).has_value());
    CHECK(buf.prev_index(0) == 3);   // newest wraps back to slot 3
    CHECK(buf.prev_index(2) == 1);
}
