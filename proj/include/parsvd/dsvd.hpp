#pragma once

#include <optional>
#include <vector>

#include "parsvd/comm.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/matrix.hpp"

namespace parsvd {

// How each rank obtains its truncated right singular vectors.
enum class LocalVectorMethod {
    Svd,        // thin SVD of the local block
    Snapshots,  // eigenvectors of the local Gram matrix a^T a
};

struct ApmosConfig {
    Index r1 = 50;  // local right-vector truncation
    Index r2 = 5;   // global mode truncation
    Index k_modes = 2;
    bool use_randomized = false;
    // target_rank is replaced by r2 (apmos) or k_modes (parallel_qr).
    RandomSketchConfig sketch;
    LocalVectorMethod local_method = LocalVectorMethod::Svd;

    void validate(comm::Rank world_size, Index columns) const;
};

// This rank's rows of the global left singular vectors, plus the global
// singular values (replicated bitwise on every rank).
struct LocalModes {
    DenseMatrix u_local;
    std::vector<double> s;
};

struct RightVectors {
    DenseMatrix v;          // columns x r1
    std::vector<double> s;  // r1 values
};

// First r1 right singular vectors and values of a_local. A block with fewer
// than r1 singular values is padded with zero columns, which leave the
// gathered W's column space unchanged.
RightVectors generate_right_vectors(const DenseMatrix& a_local, Index r1,
                                    LocalVectorMethod method = LocalVectorMethod::Svd);

// Approximate partitioned method of snapshots. Collective.
LocalModes apmos(comm::RankContext& ctx, const DenseMatrix& a_local, const ApmosConfig& cfg);

struct ParallelQrResult {
    DenseMatrix q_local;  // this rank's rows of the global Q
    DenseMatrix r_final;  // root only; empty elsewhere
    DenseMatrix u_new;    // left vectors of r_final, replicated
    std::vector<double> s_new;
};

// Tall-skinny QR over row blocks followed by an SVD of the final R at the
// root. Collective.
ParallelQrResult parallel_qr(comm::RankContext& ctx, const DenseMatrix& a_local, const ApmosConfig& cfg);

LocalModes parallel_stream_initialize(comm::RankContext& ctx, const DenseMatrix& a_local, const ApmosConfig& cfg);
LocalModes parallel_stream_incorporate(comm::RankContext& ctx, const LocalModes& state, const DenseMatrix& a_new,
                                       const ApmosConfig& cfg, double forget_factor);

// Row-stacks every rank's u_local at the root.
std::optional<DenseMatrix> gather_modes(comm::RankContext& ctx, const LocalModes& modes);

}  // namespace parsvd
