#ifndef GCPA_CORE_RNG_HPP
#define GCPA_CORE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gcpa {

// Deterministic RNG with pinned distribution algorithms. std::mt19937_64 is
// portable bit-for-bit, but the std distributions are not, so uniform/normal
// are implemented here directly.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi] inclusive
    long uniform_int(long lo, long hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<long>(eng_() % span);
    }

    // Box-Muller, one value per call (the sine twin is discarded to keep the
    // stream position independent of call pattern)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // In-place Fisher-Yates
    template <typename V>
    void shuffle(std::vector<V>& v) {
        for (long i = static_cast<long>(v.size()) - 1; i > 0; --i) {
            long j = uniform_int(0, i);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

    // Derives an independent stream from (seed, tags...). Used so that e.g.
    // the epoch-k shuffle and the per-sample augmentation draw from streams
    // that are reproducible from the step index alone.
    static uint64_t derive(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
        uint64_t h = seed;
        for (uint64_t x : {a, b, c}) {
            h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            h *= 0xff51afd7ed558ccdULL;
            h ^= h >> 33;
        }
        return h;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace gcpa

#endif
