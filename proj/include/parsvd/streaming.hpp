#pragma once

#include <vector>

#include "parsvd/matrix.hpp"

namespace parsvd {

struct StreamConfig {
    Index k_modes = 5;
    double forget_factor = 0.95;
    Index batch_columns = 100;

    void validate() const;
};

// Leading K left singular vectors and values after `iteration` updates.
struct StreamState {
    DenseMatrix modes;
    std::vector<double> singular_values;
    Index iteration = 0;
};

// Modes drifting further than this from orthonormal get one QR pass.
inline constexpr double kReorthonormalizeThreshold = 1e-8;

// a0 = QR, R = U' D V^T, modes = first K columns of Q U'.
StreamState stream_initialize(const DenseMatrix& a0, const StreamConfig& cfg);

// One forget-factor update:
//   [ff * modes * diag(s) | a_new] = Q' D', D' = U~ D~ V~^T,
//   modes = Q' U~[:, top K], s = D~[top K].
StreamState stream_incorporate(const StreamState& state, const DenseMatrix& a_new, const StreamConfig& cfg);

// Indices of the k largest values, descending, ties in original order.
std::vector<Index> top_k_indices(const std::vector<double>& values, Index k);

// Applies the drift check above; r's diagonal is folded into the values.
void reorthonormalize_if_drifted(DenseMatrix& modes, std::vector<double>& singular_values);

}  // namespace parsvd
