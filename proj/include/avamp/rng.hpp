#pragma once
#include <cstdint>
#include <random>

namespace avamp {

// Seeded stream with counter-based substreams so that independent
// Monte-Carlo trials get reproducible generators regardless of the
// order in which worker threads pick them up.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(mix(seed)) {}

    // Substream for trial `index` under `master` seed.
    static Rng substream(std::uint64_t master, std::uint64_t index) {
        return Rng(mix(master) ^ mix(index * 0x9e3779b97f4a7c15ULL + 1));
    }

    double gaussian() { return normal_(gen_); }
    double uniform() { return unif_(gen_); }
    std::mt19937_64& engine() { return gen_; }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

} // namespace avamp
