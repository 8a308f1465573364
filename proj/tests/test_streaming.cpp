#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "parsvd/datagen.hpp"
#include "parsvd/error.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/random.hpp"
#include "parsvd/streaming.hpp"

using namespace parsvd;

namespace {

StreamState run_stream(const DenseMatrix& a, const StreamConfig& cfg) {
    StreamState state = stream_initialize(a.col_range(0, std::min(cfg.batch_columns, a.cols())), cfg);
    for (Index c = cfg.batch_columns; c < a.cols(); c += cfg.batch_columns)
        state = stream_incorporate(state, a.col_range(c, std::min(cfg.batch_columns, a.cols() - c)), cfg);
    return state;
}

// Largest sine of the principal angles between two orthonormal bases.
double subspace_distance(const DenseMatrix& a, const DenseMatrix& b) {
    const DenseMatrix p = oracle::triple_loop_matmul(a, oracle::triple_loop_matmul(a.transpose(), b));
    return oracle::minus(b, p).max_abs();
}

}  // namespace

TEST_CASE("initialize on a diagonal batch") {
    const DenseMatrix a = DenseMatrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
    const StreamState s = stream_initialize(a, {3, 0.95, 3});
    CHECK(s.singular_values == std::vector<double>{3.0, 2.0, 1.0});
    CHECK(s.iteration == 0);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) CHECK(std::abs(s.modes(i, j)) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("initialize with K = B reproduces svd_full exactly") {
    const DenseMatrix a = gaussian_matrix(40, 6, 5);
    const StreamState s = stream_initialize(a, {6, 1.0, 6});
    CHECK(s.singular_values == svd_full(a, false).s);
}

TEST_CASE("initialize on the first Burgers batch") {
    BurgersConfig bc;
    bc.grid_points = 2048;
    const DenseMatrix a0 = burgers_matrix(bc).col_range(0, 100);
    const StreamState s = stream_initialize(a0, {10, 0.95, 100});
    const SvdResult ref = svd_full(a0, false);
    for (Index k = 0; k < 10; ++k) CHECK(std::abs(s.singular_values[k] - ref.s[k]) <= 1e-10 * ref.s[k]);
}

TEST_CASE("single-shot equivalence when the data fit in K modes") {
    const std::vector<double> sigma{9.0, 5.0, 2.0, 1.0};
    const DenseMatrix a = synthetic_spectrum_matrix(120, 60, sigma, 99);
    const StreamState s = run_stream(a, {4, 1.0, 10});
    const SvdResult ref = svd_full(a, false);
    for (Index k = 0; k < 4; ++k) CHECK(std::abs(s.singular_values[k] - ref.s[k]) <= 1e-8 * ref.s[k]);
    CHECK(oracle::aligned_max_diff(ref.u.col_range(0, 4), s.modes) <= 1e-6);
    CHECK(s.iteration == 5);
}

TEST_CASE("single-shot equivalence with a negligible tail") {
    std::vector<double> sigma(30);
    for (Index k = 0; k < sigma.size(); ++k) sigma[k] = std::pow(10.0, -static_cast<double>(k));
    const DenseMatrix a = synthetic_spectrum_matrix(80, 60, sigma, 3);
    const StreamState s = run_stream(a, {16, 1.0, 20});
    const SvdResult ref = svd_full(a, false);
    for (Index k = 0; k < 5; ++k) CHECK(std::abs(s.singular_values[k] - ref.s[k]) <= 1e-8 * ref.s[k]);
    CHECK(oracle::aligned_max_diff(ref.u.col_range(0, 5), s.modes.col_range(0, 5)) <= 1e-6);
}

TEST_CASE("columns inside the current span leave the subspace unchanged") {
    const DenseMatrix a = gaussian_matrix(30, 4, 12);
    const StreamConfig cfg{4, 1.0, 4};
    const StreamState s0 = stream_initialize(a, cfg);
    const DenseMatrix inside = matmul(s0.modes, gaussian_matrix(4, 3, 13));
    const StreamState s1 = stream_incorporate(s0, inside, cfg);
    CHECK(subspace_distance(s0.modes, s1.modes) <= 1e-8);
    for (Index k = 0; k < 4; ++k) CHECK(s1.singular_values[0] >= s0.singular_values[0] - 1e-12);
}

TEST_CASE("forget factor damps older energy") {
    const DenseMatrix batch = gaussian_matrix(25, 5, 21);
    const StreamState damped = stream_incorporate(stream_initialize(batch, {3, 0.95, 5}), batch, {3, 0.95, 5});
    const StreamState full = stream_incorporate(stream_initialize(batch, {3, 1.0, 5}), batch, {3, 1.0, 5});
    CHECK(damped.singular_values[0] < full.singular_values[0]);
    CHECK(damped.singular_values[0] <= full.singular_values[0] + 1e-12);
    const double both = svd_full(concat_cols(batch, batch), false).s[0];
    CHECK(std::abs(full.singular_values[0] - both) <= 1e-10 * both);
}

TEST_CASE("state invariants over many batches") {
    BurgersConfig bc;
    bc.grid_points = 512;
    const DenseMatrix a = burgers_matrix(bc);
    const StreamConfig cfg{5, 0.95, 37};  // ragged final batch
    StreamState state = stream_initialize(a.col_range(0, 37), cfg);
    for (Index c = 37; c < a.cols(); c += 37) {
        state = stream_incorporate(state, a.col_range(c, std::min<Index>(37, a.cols() - c)), cfg);
        CHECK(state.singular_values.size() == 5);
        CHECK(oracle::orthonormality(state.modes) <= 1e-8);
        for (Index k = 1; k < 5; ++k) CHECK(state.singular_values[k] <= state.singular_values[k - 1]);
        CHECK(state.singular_values[4] >= 0.0);
    }
}

TEST_CASE("top-k selection is a stable descending sort") {
    CHECK(top_k_indices({1.0, 3.0, 3.0, 2.0}, 3) == std::vector<Index>{1, 2, 3});
    CHECK(top_k_indices({1.0}, 4) == std::vector<Index>{0});
}

TEST_CASE("drift triggers re-orthonormalization") {
    DenseMatrix modes = qr_factor(gaussian_matrix(20, 3, 1)).q;
    std::vector<double> s{3.0, 2.0, 1.0};
    DenseMatrix untouched = modes;
    reorthonormalize_if_drifted(untouched, s);
    CHECK(untouched == modes);
    CHECK(s == std::vector<double>{3.0, 2.0, 1.0});

    for (Index i = 0; i < 20; ++i) modes(i, 1) *= 1.001;
    reorthonormalize_if_drifted(modes, s);
    CHECK(oracle::orthonormality(modes) <= 1e-12);
    CHECK(std::abs(s[1] - 2.002) <= 1e-12);
}

TEST_CASE("stream errors") {
    CHECK_THROWS_AS(stream_initialize(gaussian_matrix(10, 3, 0), {4, 1.0, 3}), InvalidArgument);
    CHECK_THROWS_AS(stream_initialize(gaussian_matrix(10, 3, 0), {2, 0.0, 3}), InvalidArgument);
    CHECK_THROWS_AS(stream_initialize(gaussian_matrix(10, 3, 0), {2, 1.5, 3}), InvalidArgument);
    const StreamState s = stream_initialize(gaussian_matrix(10, 3, 0), {2, 1.0, 3});
    CHECK_THROWS_AS(stream_incorporate(s, gaussian_matrix(9, 3, 0), {2, 1.0, 3}), InvalidArgument);
    CHECK_THROWS_AS(stream_incorporate(s, gaussian_matrix(10, 3, 0), {3, 1.0, 3}), InvalidArgument);
}
