#include "parsvd/datagen.hpp"

#include <cmath>
#include <string>

#include "parsvd/error.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/random.hpp"

namespace parsvd {

void BurgersConfig::validate() const {
    if (!(length > 0.0) || !std::isfinite(length)) throw InvalidArgument("burgers: length must be positive");
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw InvalidArgument("burgers: t_final must be non-negative");
    if (!(reynolds > 0.0) || !std::isfinite(reynolds)) throw InvalidArgument("burgers: reynolds must be positive");
    if (grid_points < 2) throw InvalidArgument("burgers: grid_points must be at least 2");
    if (n_snapshots < 1) throw InvalidArgument("burgers: n_snapshots must be at least 1");
}

double BurgersConfig::grid_x(Index i) const noexcept {
    return static_cast<double>(i) * length / static_cast<double>(grid_points - 1);
}

double BurgersConfig::snapshot_t(Index j) const noexcept {
    if (n_snapshots == 1) return 0.0;
    return static_cast<double>(j) * t_final / static_cast<double>(n_snapshots - 1);
}

double burgers_solution(double x, double t, const BurgersConfig& cfg) {
    if (!(x >= 0.0 && x <= cfg.length))
        throw InvalidArgument("burgers_solution: x = " + std::to_string(x) + " outside [0, L]");
    if (!(t >= 0.0 && t <= cfg.t_final))
        throw InvalidArgument("burgers_solution: t = " + std::to_string(t) + " outside [0, t_final]");
    const double re = cfg.reynolds;
    // sqrt((t+1)/t0) * exp(Re x^2 / (4t+4)) with log t0 = Re / 8
    const double exponent = 0.5 * (std::log1p(t) - re / 8.0) + re * x * x / (4.0 * t + 4.0);
    return (x / (t + 1.0)) / (1.0 + std::exp(exponent));
}

DenseMatrix burgers_matrix(const BurgersConfig& cfg) {
    cfg.validate();
    const double bytes = 8.0 * static_cast<double>(cfg.grid_points) * static_cast<double>(cfg.n_snapshots);
    if (bytes > static_cast<double>(cfg.max_bytes))
        throw CapacityError("burgers_matrix: " + std::to_string(cfg.grid_points) + "x" +
                            std::to_string(cfg.n_snapshots) + " needs " + std::to_string(bytes) +
                            " bytes, cap is " + std::to_string(cfg.max_bytes));
    DenseMatrix out(cfg.grid_points, cfg.n_snapshots);
    for (Index j = 0; j < cfg.n_snapshots; ++j) {
        const double t = cfg.snapshot_t(j);
        auto col = out.col(j);
        for (Index i = 0; i < cfg.grid_points; ++i) col[i] = burgers_solution(cfg.grid_x(i), t, cfg);
    }
    return out;
}

DenseMatrix synthetic_spectrum_matrix(Index rows, Index cols, std::span<const double> sigma, std::uint64_t seed) {
    const Index k = sigma.size();
    if (k > std::min(rows, cols))
        throw InvalidArgument("synthetic_spectrum_matrix: " + std::to_string(k) + " singular values for " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    for (Index i = 0; i < k; ++i) {
        if (!(sigma[i] >= 0.0) || !std::isfinite(sigma[i]))
            throw InvalidArgument("synthetic_spectrum_matrix: singular values must be finite and non-negative");
        if (i > 0 && sigma[i] > sigma[i - 1])
            throw InvalidArgument("synthetic_spectrum_matrix: singular values must be descending");
    }
    if (k == 0) return DenseMatrix(rows, cols);
    const DenseMatrix u = qr_factor(gaussian_matrix(rows, k, seed)).q;
    const DenseMatrix v = qr_factor(gaussian_matrix(cols, k, seed ^ 0xA5A5A5A5A5A5A5A5ULL)).q;
    return matmul(scale_columns(u, sigma), v.transpose());
}

std::vector<Index> row_partition_sizes(Index rows, Index world_size) {
    if (world_size == 0) throw InvalidArgument("row_partition: world size must be at least 1");
    if (world_size > rows)
        throw InvalidArgument("row_partition: world size " + std::to_string(world_size) + " exceeds row count " +
                              std::to_string(rows));
    std::vector<Index> sizes(world_size, rows / world_size);
    for (Index r = 0; r < rows % world_size; ++r) ++sizes[r];
    return sizes;
}

std::vector<DenseMatrix> row_partition(const DenseMatrix& a, Index world_size) {
    const auto sizes = row_partition_sizes(a.rows(), world_size);
    std::vector<DenseMatrix> blocks;
    blocks.reserve(world_size);
    Index offset = 0;
    for (Index s : sizes) {
        blocks.push_back(a.row_range(offset, s));
        offset += s;
    }
    return blocks;
}

}  // namespace parsvd
