#include "parsvd/dsvd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parsvd/error.hpp"

namespace parsvd {

namespace {

// Point-to-point tag for the Q slice sent to `rank`.
comm::Tag q_slice_tag(comm::Rank rank) { return rank + 10; }

void require_descending(const std::vector<double>& s, const char* where) {
    for (Index i = 1; i < s.size(); ++i)
        if (s[i] > s[i - 1]) throw Error(std::string(where) + ": singular values are not descending");
}

}  // namespace

void ApmosConfig::validate(comm::Rank world_size, Index columns) const {
    if (r1 == 0 || r2 == 0 || k_modes == 0) throw InvalidArgument("apmos: r1, r2 and k_modes must be positive");
    if (r1 > columns)
        throw InvalidArgument("apmos: r1 = " + std::to_string(r1) + " exceeds local column count " +
                              std::to_string(columns));
    const Index w_rank = std::min<Index>(columns, Index{world_size} * r1);
    if (r2 > w_rank)
        throw InvalidArgument("apmos: r2 = " + std::to_string(r2) + " exceeds the " + std::to_string(w_rank) +
                              " singular values of the gathered W");
    if (k_modes > r2)
        throw InvalidArgument("apmos: k_modes = " + std::to_string(k_modes) + " exceeds r2 = " + std::to_string(r2));
}

RightVectors generate_right_vectors(const DenseMatrix& a_local, Index r1, LocalVectorMethod method) {
    const Index n = a_local.cols();
    if (r1 == 0 || r1 > n)
        throw InvalidArgument("generate_right_vectors: r1 = " + std::to_string(r1) + " outside [1, " +
                              std::to_string(n) + "]");
    RightVectors out{DenseMatrix(n, r1), std::vector<double>(r1, 0.0)};
    if (method == LocalVectorMethod::Svd) {
        const SvdResult svd = svd_full(a_local, true);
        const Index kept = std::min(r1, svd.s.size());
        for (Index j = 0; j < kept; ++j) {
            out.s[j] = svd.s[j];
            for (Index i = 0; i < n; ++i) out.v(i, j) = (*svd.vt)(j, i);
        }
    } else {
        // a^T a = V S^2 V^T; its left singular vectors are V.
        const SvdResult eig = svd_full(matmul_tn(a_local, a_local), false);
        const Index kept = std::min({r1, eig.s.size(), a_local.rows()});
        for (Index j = 0; j < kept; ++j) {
            out.s[j] = std::sqrt(eig.s[j]);
            std::copy(eig.u.col(j).begin(), eig.u.col(j).end(), out.v.col(j).begin());
        }
    }
    return out;
}

LocalModes apmos(comm::RankContext& ctx, const DenseMatrix& a_local, const ApmosConfig& cfg) {
    cfg.validate(ctx.world_size(), a_local.cols());
    const RightVectors local = generate_right_vectors(a_local, cfg.r1, cfg.local_method);
    const DenseMatrix w_local = scale_columns(local.v, local.s);

    const auto gathered = ctx.gather(w_local, 0);
    DenseMatrix x;
    std::vector<double> lambda;
    if (gathered) {
        const DenseMatrix w = concat_cols(*gathered);
        if (w.cols() != Index{ctx.world_size()} * cfg.r1)
            throw InvalidArgument("apmos: ranks disagree on the column count or r1");
        SvdResult svd;
        if (cfg.use_randomized) {
            RandomSketchConfig sketch = cfg.sketch;
            sketch.target_rank = cfg.r2;
            svd = low_rank_svd(w, sketch, false);
        } else {
            // Y is never needed
            svd = truncate(svd_full(w, false), cfg.r2);
        }
        require_descending(svd.s, "apmos");
        x = std::move(svd.u);
        lambda = std::move(svd.s);
    }
    x = ctx.broadcast(x, 0);
    lambda = ctx.broadcast(lambda, 0);

    LocalModes out;
    out.u_local = DenseMatrix(a_local.rows(), cfg.k_modes);
    out.s.assign(lambda.begin(), lambda.begin() + static_cast<std::ptrdiff_t>(cfg.k_modes));
    for (Index j = 0; j < cfg.k_modes; ++j) {
        if (!(lambda[j] > 1e-14 * lambda[0]))
            throw DegenerateModeError("apmos: global singular value " + std::to_string(j) +
                                          " is zero; mode " + std::to_string(j) + " is undefined",
                                      j);
        const DenseMatrix phi = matmul(a_local, x.col_range(j, 1));
        const double inv = 1.0 / lambda[j];
        for (Index i = 0; i < a_local.rows(); ++i) out.u_local(i, j) = inv * phi(i, 0);
    }
    return out;
}

ParallelQrResult parallel_qr(comm::RankContext& ctx, const DenseMatrix& a_local, const ApmosConfig& cfg) {
    const QrResult local = qr_factor(a_local);
    const auto gathered = ctx.gather(local.r, 0);

    ParallelQrResult out;
    DenseMatrix q_slice;
    if (gathered) {
        const Index c = local.r.cols();
        for (const auto& r : *gathered)
            if (r.cols() != c) throw InvalidArgument("parallel_qr: ranks disagree on the column count");
        const DenseMatrix stacked = concat_rows(*gathered);
        QrResult global = qr_factor(stacked);

        Index offset = 0;
        for (comm::Rank r = 0; r < ctx.world_size(); ++r) {
            const Index height = (*gathered)[r].rows();
            DenseMatrix slice = global.q.row_range(offset, height);
            offset += height;
            if (r == 0)
                q_slice = std::move(slice);
            else
                ctx.send(slice, r, q_slice_tag(r));
        }

        SvdResult small;
        if (cfg.use_randomized) {
            RandomSketchConfig sketch = cfg.sketch;
            sketch.target_rank = cfg.k_modes;
            small = low_rank_svd(global.r, sketch, false);
        } else {
            small = svd_full(global.r, false);
        }
        require_descending(small.s, "parallel_qr");
        out.u_new = std::move(small.u);
        out.s_new = std::move(small.s);
        out.r_final = std::move(global.r);
    } else {
        q_slice = ctx.recv(0, q_slice_tag(ctx.rank()));
    }
    out.q_local = matmul(local.q, q_slice);
    out.u_new = ctx.broadcast(out.u_new, 0);
    out.s_new = ctx.broadcast(out.s_new, 0);
    return out;
}

LocalModes parallel_stream_initialize(comm::RankContext& ctx, const DenseMatrix& a_local, const ApmosConfig& cfg) {
    return apmos(ctx, a_local, cfg);
}

LocalModes parallel_stream_incorporate(comm::RankContext& ctx, const LocalModes& state, const DenseMatrix& a_new,
                                       const ApmosConfig& cfg, double forget_factor) {
    if (!(forget_factor > 0.0 && forget_factor <= 1.0))
        throw InvalidArgument("parallel_stream_incorporate: forget factor must lie in (0, 1]");
    if (state.u_local.cols() != cfg.k_modes || state.s.size() != cfg.k_modes)
        throw InvalidArgument("parallel_stream_incorporate: state holds " + std::to_string(state.u_local.cols()) +
                              " modes, config expects " + std::to_string(cfg.k_modes));
    if (a_new.rows() != state.u_local.rows())
        throw InvalidArgument("parallel_stream_incorporate: batch has " + std::to_string(a_new.rows()) +
                              " rows, local modes have " + std::to_string(state.u_local.rows()));

    const DenseMatrix ll = concat_cols(scale_columns(state.u_local, state.s, forget_factor), a_new);
    const ParallelQrResult qr = parallel_qr(ctx, ll, cfg);
    if (qr.s_new.size() < cfg.k_modes)
        throw InvalidArgument("parallel_stream_incorporate: only " + std::to_string(qr.s_new.size()) +
                              " singular values available for " + std::to_string(cfg.k_modes) + " modes");

    LocalModes next;
    next.u_local = matmul(qr.q_local, qr.u_new).col_range(0, cfg.k_modes);
    next.s.assign(qr.s_new.begin(), qr.s_new.begin() + static_cast<std::ptrdiff_t>(cfg.k_modes));
    return next;
}

std::optional<DenseMatrix> gather_modes(comm::RankContext& ctx, const LocalModes& modes) {
    auto parts = ctx.gather(modes.u_local, 0);
    if (!parts) return std::nullopt;
    return concat_rows(*parts);
}

}  // namespace parsvd
