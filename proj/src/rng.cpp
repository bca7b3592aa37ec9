#include "advdiff/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace advdiff {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_seed(std::uint64_t root, StreamTag tag, std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t h = root;
    for (std::uint64_t v : {static_cast<std::uint64_t>(tag), a, b}) {
        h = mix64(h + kGolden * (v + 1));
    }
    return h;
}

std::size_t sample_index(std::uint64_t seed, std::size_t agent, std::size_t iteration, std::size_t count) {
    if (count == 0) throw std::invalid_argument("sample_index: empty range");
    const auto n = static_cast<std::uint64_t>(count);
    // 2^64 mod n; words below it would bias h % n toward small indices.
    const std::uint64_t reject_below = (0 - n) % n;
    std::uint64_t h = derive_seed(seed, StreamTag::sampling, agent, iteration);
    while (h < reject_below) {
        h = mix64(h + kGolden);
    }
    return static_cast<std::size_t>(h % n);
}

double RandomStream::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::gaussian() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

}  // namespace advdiff
