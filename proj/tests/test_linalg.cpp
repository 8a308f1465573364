#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "parsvd/datagen.hpp"
#include "parsvd/error.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/random.hpp"

using namespace parsvd;

namespace {

double truncation_error(const std::vector<double>& sigma, Index r) {
    double acc = 0.0;
    for (Index k = r; k < sigma.size(); ++k) acc += sigma[k] * sigma[k];
    return std::sqrt(acc);
}

DenseMatrix residual_after_projection(const DenseMatrix& a, const DenseMatrix& q) {
    return oracle::minus(a, oracle::triple_loop_matmul(q, oracle::triple_loop_matmul(q.transpose(), a)));
}

}  // namespace

TEST_CASE("matrix constructors reject bad storage") {
    CHECK_THROWS_AS(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), InvalidArgument);
    CHECK_THROWS_AS(DenseMatrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidArgument);
    CHECK_THROWS_AS(DenseMatrix(1, 1, {std::numeric_limits<double>::infinity()}), InvalidArgument);
    const DenseMatrix a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
    CHECK(a(1, 0) == 3.0);
    CHECK(a.storage() == std::vector<double>{1, 3, 2, 4});
}

TEST_CASE("matmul and concatenation") {
    const DenseMatrix x = gaussian_matrix(2, 5, 7);
    CHECK(matmul(DenseMatrix::identity(2), x) == x);

    const DenseMatrix a = gaussian_matrix(3, 2, 1), b = gaussian_matrix(3, 1, 2);
    const DenseMatrix c = concat_cols(a, b);
    REQUIRE(c.rows() == 3);
    REQUIRE(c.cols() == 3);
    for (Index i = 0; i < 3; ++i) {
        CHECK(c(i, 0) == a(i, 0));
        CHECK(c(i, 1) == a(i, 1));
        CHECK(c(i, 2) == b(i, 0));
    }
    const DenseMatrix r = concat_rows(a, gaussian_matrix(1, 2, 3));
    CHECK(r.rows() == 4);
    CHECK(r.row_range(0, 3) == a);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const DenseMatrix p = gaussian_matrix(3, 3, seed), q = gaussian_matrix(3, 3, seed + 100);
        CHECK(oracle::max_abs_diff(matmul(p, q), oracle::triple_loop_matmul(p, q)) <= 1e-14);
        CHECK(oracle::max_abs_diff(matmul_tn(p, q), oracle::triple_loop_matmul(p.transpose(), q)) <= 1e-14);
    }

    CHECK_THROWS_AS(matmul(gaussian_matrix(2, 3, 0), gaussian_matrix(2, 3, 0)), InvalidArgument);
    CHECK_THROWS_AS(concat_cols(gaussian_matrix(2, 1, 0), gaussian_matrix(3, 1, 0)), InvalidArgument);
    CHECK_THROWS_AS(concat_rows(gaussian_matrix(2, 1, 0), gaussian_matrix(2, 2, 0)), InvalidArgument);
}

TEST_CASE("counter rng follows the SplitMix64 stream") {
    // Published first outputs of SplitMix64 seeded with 0 and 1234567.
    CHECK(CounterRng::word(0, 0) == 0xE220A8397B1DCDAFull);
    CHECK(CounterRng::word(1234567, 0) == 6457827717110365317ull);
    CHECK(CounterRng::word(1234567, 1) == 3203168211198807973ull);

    CounterRng rng(42);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.01);
    CHECK(gaussian_matrix(4, 3, 9) == gaussian_matrix(4, 3, 9));
    CHECK_FALSE(gaussian_matrix(4, 3, 9) == gaussian_matrix(4, 3, 10));
}

TEST_CASE("qr of the identity is the identity") {
    const QrResult qr = qr_factor(DenseMatrix::identity(3));
    CHECK(qr.q == DenseMatrix::identity(3));
    CHECK(qr.r == DenseMatrix::identity(3));
}

TEST_CASE("qr of a zero matrix completes q") {
    const QrResult qr = qr_factor(DenseMatrix(2, 2));
    CHECK(qr.r.max_abs() == 0.0);
    CHECK(oracle::orthonormality(qr.q) <= 1e-14);
}

TEST_CASE("qr matches modified Gram-Schmidt") {
    const DenseMatrix a = gaussian_matrix(8, 3, 20240501);
    const QrResult qr = qr_factor(a);
    const oracle::Qr ref = oracle::mgs_qr(a);
    CHECK(oracle::frobenius(oracle::minus(a, oracle::triple_loop_matmul(qr.q, qr.r))) / oracle::frobenius(a) <= 1e-12);
    for (Index j = 0; j < 3; ++j) CHECK(qr.r(j, j) >= 0.0);
    CHECK(oracle::max_abs_diff(qr.q, ref.q) <= 1e-12);
    CHECK(oracle::max_abs_diff(qr.r, ref.r) <= 1e-12);
    CHECK(qr_factor(a).q == qr.q);
}

TEST_CASE("qr shapes and errors") {
    const QrResult wide = qr_factor(gaussian_matrix(3, 7, 5));
    CHECK(wide.q.cols() == 3);
    CHECK(wide.r.rows() == 3);
    CHECK(wide.r.cols() == 7);
    for (Index j = 0; j < 7; ++j)
        for (Index i = j + 1; i < 3; ++i) CHECK(wide.r(i, j) == 0.0);
    CHECK_THROWS_AS(qr_factor(DenseMatrix(0, 3)), InvalidArgument);
    CHECK_THROWS_AS(qr_factor(DenseMatrix(3, 0)), InvalidArgument);
}

TEST_CASE("svd of diagonal and identity matrices") {
    const SvdResult d = svd_full(DenseMatrix::from_rows({{3, 0}, {0, 1}}), true);
    CHECK(d.s == std::vector<double>{3.0, 1.0});
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
            CHECK(std::abs(d.u(i, j)) == (i == j ? 1.0 : 0.0));
            CHECK(std::abs((*d.vt)(i, j)) == (i == j ? 1.0 : 0.0));
        }
    const SvdResult id = svd_full(DenseMatrix::identity(4), false);
    CHECK(id.s == std::vector<double>(4, 1.0));
    CHECK_FALSE(id.vt.has_value());
}

TEST_CASE("svd agrees with the Gram eigen oracle") {
    const DenseMatrix a = gaussian_matrix(6, 4, 77);
    const SvdResult svd = svd_full(a, true);
    const oracle::Eigen eig = oracle::jacobi_eigen(oracle::gram(a));
    REQUIRE(svd.s.size() == 4);
    for (Index k = 0; k < 4; ++k) CHECK(std::abs(svd.s[k] - std::sqrt(eig.values[k])) <= 1e-9 * svd.s[k]);
    CHECK(oracle::aligned_max_diff(eig.vectors, svd.vt->transpose()) <= 1e-9);
    CHECK(oracle::orthonormality(svd.u) <= 1e-12);
    CHECK(oracle::frobenius(oracle::minus(oracle::usv(svd.u, svd.s, *svd.vt), a)) <= 1e-10 * oracle::frobenius(a));
}

TEST_CASE("svd of wide and rank-deficient inputs") {
    const DenseMatrix wide = gaussian_matrix(3, 9, 4);
    const SvdResult w = svd_full(wide, true);
    CHECK(w.s.size() == 3);
    CHECK(w.u.rows() == 3);
    CHECK(w.vt->rows() == 3);
    CHECK(w.vt->cols() == 9);
    CHECK(oracle::frobenius(oracle::minus(oracle::usv(w.u, w.s, *w.vt), wide)) <= 1e-10 * oracle::frobenius(wide));

    const std::vector<double> sigma{2.0, 1.0};
    const DenseMatrix low = synthetic_spectrum_matrix(7, 5, sigma, 3);
    const SvdResult l = svd_full(low, true);
    CHECK(std::abs(l.s[0] - 2.0) <= 1e-12);
    CHECK(std::abs(l.s[1] - 1.0) <= 1e-12);
    for (Index k = 2; k < 5; ++k) CHECK(l.s[k] <= 1e-14);
    CHECK(oracle::orthonormality(l.u) <= 1e-12);

    const SvdResult zero = svd_full(DenseMatrix(4, 3), true);
    CHECK(zero.s == std::vector<double>(3, 0.0));
    CHECK(oracle::orthonormality(zero.u) <= 1e-14);
}

TEST_CASE("svd sign convention and determinism") {
    const DenseMatrix a = gaussian_matrix(12, 5, 11);
    const SvdResult x = svd_full(a, true), y = svd_full(a, true);
    CHECK(x.u == y.u);
    CHECK(x.s == y.s);
    CHECK(*x.vt == *y.vt);
    for (Index j = 0; j < x.u.cols(); ++j) {
        Index arg = 0;
        for (Index i = 0; i < x.u.rows(); ++i)
            if (std::abs(x.u(i, j)) > std::abs(x.u(arg, j))) arg = i;
        CHECK(x.u(arg, j) > 0.0);
    }
}

TEST_CASE("svd reports non-convergence") {
    for (int sweeps : {0, 1}) {
        JacobiOptions opts;
        opts.max_sweeps = sweeps;
        try {
            (void)svd_full(gaussian_matrix(6, 6, 1), false, opts);
            FAIL("expected ConvergenceError");
        } catch (const ConvergenceError& e) {
            CHECK(e.residual() > opts.off_tolerance);
        }
    }
}

TEST_CASE("randomized range captures an exact low-rank matrix") {
    const DenseMatrix u = gaussian_matrix(30, 1, 1), v = gaussian_matrix(20, 1, 2);
    const DenseMatrix u2 = gaussian_matrix(30, 1, 3), v2 = gaussian_matrix(20, 1, 4);
    DenseMatrix a = oracle::triple_loop_matmul(u, v.transpose());
    const DenseMatrix b = oracle::triple_loop_matmul(u2, v2.transpose());
    for (Index i = 0; i < a.size(); ++i) a.data()[i] += 0.5 * b.data()[i];

    RandomSketchConfig cfg{2, 2, 1, 9};
    const DenseMatrix q = randomized_range(a, cfg);
    CHECK(q.cols() == 4);
    CHECK(oracle::orthonormality(q) <= 1e-10);
    CHECK(oracle::frobenius(residual_after_projection(a, q)) <= 1e-10);

    const SvdResult lr = low_rank_svd(a, cfg);
    const SvdResult ex = svd_full(a, false);
    REQUIRE(lr.s.size() == 2);
    for (Index k = 0; k < 2; ++k) CHECK(std::abs(lr.s[k] - ex.s[k]) <= 1e-9 * ex.s[0]);
    CHECK(oracle::aligned_max_diff(ex.u.col_range(0, 2), lr.u) <= 1e-9);
}

TEST_CASE("randomized range of the identity") {
    const DenseMatrix q = randomized_range(DenseMatrix::identity(5), {5, 0, 0, 1});
    const DenseMatrix qqt = oracle::triple_loop_matmul(q, q.transpose());
    CHECK(oracle::max_abs_diff(qqt, DenseMatrix::identity(5)) <= 1e-10);
}

TEST_CASE("randomized range on a geometric spectrum") {
    std::vector<double> sigma(40);
    for (Index k = 0; k < 40; ++k) sigma[k] = std::ldexp(1.0, -static_cast<int>(k + 1));
    const DenseMatrix a = synthetic_spectrum_matrix(100, 40, sigma, 123);
    const double optimal = truncation_error(sigma, 10);
    std::vector<double> errors;
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const double err = oracle::frobenius(residual_after_projection(a, randomized_range(a, {10, 10, 1, seed})));
        errors.push_back(err);
        if (err > 3.0 * optimal) ++bad;
    }
    std::nth_element(errors.begin(), errors.begin() + 25, errors.end());
    CHECK(errors[25] <= 1.5 * optimal);
    CHECK(bad < 3);  // fewer than 5% of 50
}

TEST_CASE("low-rank svd of a padded diagonal") {
    DenseMatrix a(8, 5);
    for (Index i = 0; i < 5; ++i) a(i, i) = 5.0 - static_cast<double>(i);
    const SvdResult lr = low_rank_svd(a, {3, 2, 1, 17});
    REQUIRE(lr.s.size() == 3);
    CHECK(std::abs(lr.s[0] - 5.0) <= 1e-8);
    CHECK(std::abs(lr.s[1] - 4.0) <= 1e-8);
    CHECK(std::abs(lr.s[2] - 3.0) <= 1e-8);
    CHECK(lr.u.cols() == 3);
    CHECK(lr.vt->rows() == 3);
}

TEST_CASE("sketch configuration is validated") {
    const DenseMatrix a = gaussian_matrix(10, 6, 0);
    CHECK_THROWS_AS(low_rank_svd(a, {0, 2, 1, 0}), InvalidArgument);
    CHECK_THROWS_AS(randomized_range(a, {5, 2, 1, 0}), InvalidArgument);
    CHECK(low_rank_svd(a, {3, 1, 0, 5}).u == low_rank_svd(a, {3, 1, 0, 5}).u);
}

TEST_CASE("truncate and reconstruct") {
    const DenseMatrix a = gaussian_matrix(9, 6, 31);
    const SvdResult full = svd_full(a, true);
    const SvdResult t = truncate(full, 2);
    CHECK(t.u.cols() == 2);
    CHECK(t.s.size() == 2);
    CHECK(t.vt->rows() == 2);
    CHECK(oracle::frobenius(oracle::minus(reconstruct(full), a)) <= 1e-10 * oracle::frobenius(a));
    CHECK_THROWS_AS(truncate(full, 7), InvalidArgument);
}
