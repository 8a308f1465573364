#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "parsvd/matrix.hpp"

namespace parsvd {

// Viscous Burgers problem on [0, length] x [0, t_final] with nu = 1 / reynolds.
struct BurgersConfig {
    double length = 1.0;
    double t_final = 2.0;
    double reynolds = 1000.0;
    Index grid_points = 16384;
    Index n_snapshots = 800;
    // burgers_matrix refuses to allocate more than this.
    std::size_t max_bytes = std::size_t{512} << 20;

    void validate() const;
    double grid_x(Index i) const noexcept;
    double snapshot_t(Index j) const noexcept;
};

// u(x, t) = (x / (t + 1)) / (1 + sqrt((t + 1) / t0) exp(Re x^2 / (4t + 4))),
// t0 = exp(Re / 8). The denominator exponent is formed in log space.
double burgers_solution(double x, double t, const BurgersConfig& cfg);

// grid_points x n_snapshots; column j is u(x_i, t_j) on uniform inclusive grids.
DenseMatrix burgers_matrix(const BurgersConfig& cfg);

// U diag(sigma) V^T with seeded random orthonormal U (rows x k), V (cols x k).
DenseMatrix synthetic_spectrum_matrix(Index rows, Index cols, std::span<const double> sigma, std::uint64_t seed);

// Block heights for a contiguous split: sizes differ by at most one, the
// remainder rows going to the lowest ranks.
std::vector<Index> row_partition_sizes(Index rows, Index world_size);
std::vector<DenseMatrix> row_partition(const DenseMatrix& a, Index world_size);

}  // namespace parsvd
