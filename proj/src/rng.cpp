#include "rsfda/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>

namespace rsfda {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Rng::Rng(RngSeed s) : engine_(splitmix64(s.seed) ^ splitmix64(~s.stream * 0x2545F4914F6CDD1DULL)) {}

// Distributions are hand-rolled from raw engine output so draws do not
// depend on the standard library's distribution implementations.
double Rng::uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

double Rng::normal(double mean, double sigma) {
    // Marsaglia polar method, one value per call.
    double u, v, s;
    do {
        u = uniform(-1.0, 1.0);
        v = uniform(-1.0, 1.0);
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return mean + sigma * u * std::sqrt(-2.0 * std::log(s) / s);
}

std::size_t Rng::below(std::size_t n) {
    // Rejection sampling; no modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % n);
}

void Rng::shuffle(std::span<std::size_t> v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    shuffle(p);
    return p;
}

}  // namespace rsfda
