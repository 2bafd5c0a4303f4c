#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace pseudogen {

/// SplitMix64 finalizer; used only to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words) noexcept {
    std::uint64_t h = mix64(seed);
    for (auto w : words) {
        h = mix64(h ^ mix64(w + 0x632be59bd9b4e019ULL));
    }
    return h;
}

/// One independent random stream. Draws are a pure function of the seed,
/// so results never depend on which worker ran the stream.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    // Ziggurat sampler; several times faster than the polar method.
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
    boost::random::uniform_01<double> uniform_;
};

/// Counter-based factory: stream(i, j, ...) = hash(master_seed, tag, i, j, ...).
class StreamFactory {
public:
    explicit StreamFactory(std::uint64_t master_seed, std::uint64_t tag = 0)
        : master_(master_seed), tag_(tag) {}

    [[nodiscard]] RandomStream stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        return RandomStream(hash_words(master_, {tag_, a, b, c}));
    }

    /// A factory for an unrelated purpose (different tag) under the same seed.
    [[nodiscard]] StreamFactory derive(std::uint64_t subtag) const {
        return StreamFactory(master_, hash_words(tag_, {subtag}));
    }

    [[nodiscard]] std::uint64_t master_seed() const { return master_; }

private:
    std::uint64_t master_;
    std::uint64_t tag_;
};

/// Noise source that always returns zero; turns a stochastic step into its
/// deterministic skeleton.
struct ZeroNoise {
    double normal() { return 0.0; }
    double uniform() { return 0.5; }
};

}  // namespace pseudogen
