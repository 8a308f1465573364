#include "parsvd/random.hpp"

#include <cmath>
#include <numbers>

namespace parsvd {

std::uint64_t CounterRng::word(std::uint64_t seed, std::uint64_t counter) noexcept {
    std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double CounterRng::next_uniform() noexcept {
    return (static_cast<double>(next_word() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::next_normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u0 = next_uniform();
    const double u1 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u0));
    const double angle = 2.0 * std::numbers::pi * u1;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

DenseMatrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
    CounterRng rng(seed);
    DenseMatrix out(rows, cols);
    for (double& v : out.data()) v = rng.next_normal();
    return out;
}

}  // namespace parsvd
