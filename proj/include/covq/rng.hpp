#pragma once

#include <cstdint>
#include <random>

namespace covq {

// Deterministic random stream. The mapping from engine output to uniform
// values is fixed here (not delegated to std distributions, whose algorithms
// are implementation-defined), so a given seed reproduces the same sequence
// on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        return static_cast<int>((static_cast<__uint128_t>(gen_()) * static_cast<uint64_t>(n)) >> 64);
    }

private:
    std::mt19937_64 gen_;
};

// FNV-1a 64-bit, used for map/content hashes.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace covq
