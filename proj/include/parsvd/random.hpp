#pragma once

#include <cstdint>

#include "parsvd/matrix.hpp"

namespace parsvd {

//
// Counter-based generator with a fixed, documented bit stream.
//
//   word(i)    = mix(seed + (i + 1) * 0x9E3779B97F4A7C15)          (i = 0, 1, ...)
//   mix(z)     = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//                z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
//   uniform(i) = ((word(i) >> 11) + 0.5) * 2^-53                   in (0, 1)
//   normal pair k from words 2k, 2k+1 by Box-Muller:
//                r = sqrt(-2 ln u0), z0 = r cos(2 pi u1), z1 = r sin(2 pi u1)
//
// word(i) is the i-th output of SplitMix64 seeded with `seed`, so the stream
// can be reproduced from any language with 64-bit unsigned arithmetic.
//
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    static std::uint64_t word(std::uint64_t seed, std::uint64_t counter) noexcept;

    std::uint64_t next_word() noexcept { return word(seed_, counter_++); }
    double next_uniform() noexcept;
    double next_normal() noexcept;

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// rows x cols matrix of N(0,1) draws, filled in column-major order.
DenseMatrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed);

}  // namespace parsvd
