#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace seatvc {

/// Deterministic counter-based PRNG (splitmix64). Output depends only on the
/// seeding values, never on platform library internals, so streams are
/// bit-reproducible and can be derived independently per subject.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Derive an independent substream keyed by (seed, key, tag).
    static Rng substream(std::uint64_t seed, std::uint64_t key, std::uint64_t tag = 0) {
        Rng r(seed);
        std::uint64_t a = r.next_u64();
        Rng k(key ^ 0x9e3779b97f4a7c15ULL);
        std::uint64_t b = k.next_u64();
        return Rng(a ^ (b + 0x632be59bd9b4e019ULL * (tag + 1)));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0, 1): 53 mantissa bits, never exactly 0 or 1.
    double uniform() {
        std::uint64_t bits = next_u64() >> 11;
        return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (both uniforms always drawn, so the
    /// stream advances a fixed amount per call).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double lognormal(double log_mean, double log_sd) { return std::exp(normal(log_mean, log_sd)); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Pair (a, b) of standard normals with correlation rho.
    void correlated_normals(double rho, double& a, double& b) {
        double z1 = normal();
        double z2 = normal();
        a = z1;
        b = rho * z1 + std::sqrt(1.0 - rho * rho) * z2;
    }

    int binomial(int n, double p) {
        int c = 0;
        for (int i = 0; i < n; ++i) c += bernoulli(p) ? 1 : 0;
        return c;
    }

  private:
    std::uint64_t state_;
};

/// Stable 64-bit hash of a string, for keying per-subject substreams.
inline std::uint64_t stable_hash(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace seatvc
