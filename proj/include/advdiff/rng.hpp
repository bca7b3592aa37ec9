// Portable, seedable random streams.
//
// Every random quantity in the library is drawn from a stream derived from a
// root seed and a purpose tag, so that e.g. the training-sampling sequence does
// not depend on how many Gaussian draws the data generator consumed. All
// transforms from raw 64-bit words to doubles are implemented here rather than
// through <random> distributions, whose output is implementation-defined.
//
//   derive_seed(root, tag, a, b):  h = root; for v in (tag, a, b): h = mix64(h + G*(v+1))
//   engine:                        std::mt19937_64 (bit-exact by the standard)
//   uniform01:                     top 53 bits of one engine word, scaled by 2^-53
//   gaussian:                      Box-Muller on (1 - uniform01, uniform01), both outputs used
//   sample_index(seed, k, n, N):   counter-based; rejection-reduced mix of (seed, k, n)
#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace advdiff {

enum class StreamTag : std::uint64_t {
    trial = 1,
    features = 2,
    flips = 3,
    sampling = 4,
    holdout = 5,
    ghost = 6,
    pair_subsample = 7,
};

/// SplitMix64 finalizer.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

[[nodiscard]] std::uint64_t derive_seed(std::uint64_t root, StreamTag tag, std::uint64_t a = 0,
                                        std::uint64_t b = 0) noexcept;

/// Uniform index in [0, count) keyed only by (seed, agent, iteration). The
/// value does not depend on any previously drawn index, which keeps the
/// sampling sequence identical across horizons and across coupled datasets.
[[nodiscard]] std::size_t sample_index(std::uint64_t seed, std::size_t agent, std::size_t iteration,
                                       std::size_t count);

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01();

    double gaussian();

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace advdiff
