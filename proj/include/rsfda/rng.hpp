#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rsfda {

struct RngSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

// Named streams keep independent consumers (init, shuffling, attacks, data)
// from perturbing one another's draws.
namespace streams {
inline constexpr std::uint64_t data = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t init = 3;
inline constexpr std::uint64_t shuffle = 5;
inline constexpr std::uint64_t attack = 6;
inline constexpr std::uint64_t eval_attack = 7;
inline constexpr std::uint64_t pairs = 8;
inline constexpr std::uint64_t geometry = 9;
}  // namespace streams

class Rng {
public:
    explicit Rng(RngSeed s);
    Rng(std::uint64_t seed, std::uint64_t stream) : Rng(RngSeed{seed, stream}) {}

    double uniform(double lo, double hi);
    double normal(double mean = 0.0, double sigma = 1.0);
    std::size_t below(std::size_t n);  // uniform integer in [0, n)
    void shuffle(std::span<std::size_t> v);
    std::vector<std::size_t> permutation(std::size_t n);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace rsfda
