#pragma once

// Counter-based pseudo-random generator built on the splitmix64 finalizer.
//
// Every output is a pure function of (seed, counter), so any stream can be
// regenerated from its key alone and trajectory substreams can be derived
// cheaply without coordination between workers.  This is what makes ensemble
// runs bit-reproducible for any thread count: trajectory t always consumes
// the stream keyed by substream_key(master_seed, t), no matter which worker
// executes it.

#include <cstdint>

#include "qwalk/errors.hpp"

namespace qwalk::rng {

inline constexpr char kRngId[] = "splitmix64-ctr";

// Weyl-sequence increments: the canonical splitmix64 gamma for in-stream
// counters, and a second independent gamma for deriving substream keys.
inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kGamma2 = 0xD1B54A32D192ED03ull;

// splitmix64 finalizer: bijective avalanche mix of a 64-bit word.
constexpr std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// Output i (0-based) of the stream keyed by `seed`.
constexpr std::uint64_t stream_at(std::uint64_t seed, std::uint64_t i) {
    return mix(seed + (i + 1) * kGamma);
}

// Key for the index-th substream of a master seed.
constexpr std::uint64_t substream_key(std::uint64_t master, std::uint64_t index) {
    return mix(master + (index + 1) * kGamma2);
}

// Sequential view over one counter stream.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next() { return stream_at(seed_, counter_++); }

    // Uniform draw from {0, ..., bound-1}, unbiased (Lemire multiply-shift
    // with rejection of the short low fringe).
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound == 0) throw InvalidInput("Stream::bounded: bound must be positive");
        for (;;) {
            std::uint64_t x = next();
            unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
            std::uint64_t low = static_cast<std::uint64_t>(m);
            if (low < bound) {
                std::uint64_t threshold = (0 - bound) % bound;
                if (low < threshold) continue;
            }
            return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Uniform double in [0,1) with 53-bit resolution.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace qwalk::rng
