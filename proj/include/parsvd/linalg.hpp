#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "parsvd/matrix.hpp"

namespace parsvd {

struct QrResult {
    DenseMatrix q;  // rows x min(rows, cols), orthonormal columns
    DenseMatrix r;  // min(rows, cols) x cols, upper triangular, diag(r) >= 0
};

struct SvdResult {
    DenseMatrix u;                  // rows x k
    std::vector<double> s;          // k values, descending, non-negative
    std::optional<DenseMatrix> vt;  // k x cols when requested
};

struct RandomSketchConfig {
    Index target_rank = 1;
    Index oversampling = 10;
    Index power_iterations = 1;
    std::uint64_t seed = 0;

    Index sketch_width() const noexcept { return target_rank + oversampling; }
    // Throws InvalidArgument unless 1 <= target_rank and
    // target_rank + oversampling <= min(rows, cols).
    void validate(Index rows, Index cols) const;
};

struct JacobiOptions {
    int max_sweeps = 30;
    // Convergence: sqrt(sum of squared off-diagonal Gram entries touched in a
    // sweep) <= off_tolerance * ||a||_F^2, or a sweep with no rotation.
    double off_tolerance = 1e-13;
};

// Reduced Householder QR with the sign convention diag(r) >= 0. An input that
// is already upper triangular with a non-negative diagonal returns q = I and
// r = a exactly.
QrResult qr_factor(const DenseMatrix& a);

// Thin SVD, k = min(rows, cols). Tall inputs are reduced by qr_factor first
// unless already upper triangular; the reduced factor goes through one-sided
// Jacobi. Each u column's largest-magnitude entry is positive.
SvdResult svd_full(const DenseMatrix& a, bool want_vt, const JacobiOptions& opts = {});

// Orthonormal basis (rows x (r + p)) approximating the range of a, from a
// seeded Gaussian test matrix and optional power iterations.
DenseMatrix randomized_range(const DenseMatrix& a, const RandomSketchConfig& cfg);

// Rank-r SVD through the projected matrix Q^T a.
SvdResult low_rank_svd(const DenseMatrix& a, const RandomSketchConfig& cfg, bool want_vt = true);

// First k triplets of an SVD.
SvdResult truncate(const SvdResult& svd, Index k);

// Flip each column of u so its largest-magnitude entry (first on ties) is
// positive; the matching row of vt flips with it.
void normalize_signs(DenseMatrix& u, DenseMatrix* vt);

// u diag(s) vt.
DenseMatrix reconstruct(const SvdResult& svd);

}  // namespace parsvd
