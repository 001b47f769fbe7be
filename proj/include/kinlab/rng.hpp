// Reproducible random number generation.
//
// std::normal_distribution is implementation-defined, so byte-identical reports
// across standard libraries require a hand-rolled Gaussian. We use mt19937_64
// (bit-stable everywhere) plus Box-Muller, and derive independent substreams
// for replicas with a splitmix64 hash of (master seed, stream labels).

#ifndef KINLAB_RNG_HPP
#define KINLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace kinlab {

// splitmix64 step; good avalanche, standard constants
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Counter-based substream derivation: hash the master seed together with up to
// three labels (experiment tag, particle count, replica index). Distinct label
// tuples give statistically independent mt19937_64 seeds.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s ^= a * 0xA24BAED4963EE407ull;
    h ^= splitmix64(s);
    s ^= b * 0x9FB21C651E98DF25ull;
    h ^= splitmix64(s);
    s ^= c * 0xD6E8FEB86659FD93ull;
    h ^= splitmix64(s);
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // standard normal via Box-Muller (pair cached)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // u1 == 0 would give log(0); the smallest nonzero uniform is 2^-53
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace kinlab

#endif
