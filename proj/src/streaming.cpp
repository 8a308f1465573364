#include "parsvd/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "parsvd/error.hpp"
#include "parsvd/linalg.hpp"

namespace parsvd {

void StreamConfig::validate() const {
    if (k_modes == 0) throw InvalidArgument("stream: k_modes must be at least 1");
    if (!(forget_factor > 0.0 && forget_factor <= 1.0))
        throw InvalidArgument("stream: forget_factor must lie in (0, 1], got " + std::to_string(forget_factor));
    if (batch_columns == 0) throw InvalidArgument("stream: batch_columns must be at least 1");
}

std::vector<Index> top_k_indices(const std::vector<double>& values, Index k) {
    std::vector<Index> idx(values.size());
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return values[a] > values[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

void reorthonormalize_if_drifted(DenseMatrix& modes, std::vector<double>& singular_values) {
    if (orthonormality_error(modes) <= kReorthonormalizeThreshold) return;
    QrResult qr = qr_factor(modes);
    for (Index j = 0; j < singular_values.size(); ++j) singular_values[j] *= qr.r(j, j);
    modes = std::move(qr.q);
}

StreamState stream_initialize(const DenseMatrix& a0, const StreamConfig& cfg) {
    cfg.validate();
    if (a0.cols() < cfg.k_modes)
        throw InvalidArgument("stream_initialize: first batch has " + std::to_string(a0.cols()) +
                              " columns, fewer than K = " + std::to_string(cfg.k_modes));
    if (a0.rows() < cfg.k_modes)
        throw InvalidArgument("stream_initialize: " + std::to_string(a0.rows()) + " rows cannot hold K = " +
                              std::to_string(cfg.k_modes) + " modes");
    const QrResult qr = qr_factor(a0);
    const SvdResult small = svd_full(qr.r, false);

    StreamState state;
    state.modes = matmul(qr.q, small.u).col_range(0, cfg.k_modes);
    state.singular_values.assign(small.s.begin(), small.s.begin() + static_cast<std::ptrdiff_t>(cfg.k_modes));
    state.iteration = 0;
    return state;
}

StreamState stream_incorporate(const StreamState& state, const DenseMatrix& a_new, const StreamConfig& cfg) {
    cfg.validate();
    if (state.modes.cols() != cfg.k_modes || state.singular_values.size() != cfg.k_modes)
        throw InvalidArgument("stream_incorporate: state holds " + std::to_string(state.modes.cols()) +
                              " modes, config expects K = " + std::to_string(cfg.k_modes));
    if (a_new.rows() != state.modes.rows())
        throw InvalidArgument("stream_incorporate: batch has " + std::to_string(a_new.rows()) +
                              " rows, modes have " + std::to_string(state.modes.rows()));
    if (a_new.cols() == 0) throw InvalidArgument("stream_incorporate: empty batch");

    const DenseMatrix m = concat_cols(scale_columns(state.modes, state.singular_values, cfg.forget_factor), a_new);
    const QrResult qr = qr_factor(m);
    const SvdResult small = svd_full(qr.r, false);
    const auto keep = top_k_indices(small.s, cfg.k_modes);

    DenseMatrix selected(small.u.rows(), keep.size());
    StreamState next;
    next.singular_values.resize(keep.size());
    for (Index j = 0; j < keep.size(); ++j) {
        std::copy(small.u.col(keep[j]).begin(), small.u.col(keep[j]).end(), selected.col(j).begin());
        next.singular_values[j] = small.s[keep[j]];
    }
    next.modes = matmul(qr.q, selected);
    reorthonormalize_if_drifted(next.modes, next.singular_values);
    next.iteration = state.iteration + 1;
    return next;
}

}  // namespace parsvd
