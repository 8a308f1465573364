#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "parsvd/datagen.hpp"
#include "parsvd/error.hpp"
#include "parsvd/linalg.hpp"

using namespace parsvd;

TEST_CASE("burgers boundary and sign") {
    const BurgersConfig cfg;
    for (double t : {0.0, 0.3, 1.0, 2.0}) {
        CHECK(burgers_solution(0.0, t, cfg) == 0.0);
        for (double x : {1e-6, 0.1, 0.5, 0.9, 1.0}) CHECK(burgers_solution(x, t, cfg) > 0.0);
    }
}

TEST_CASE("burgers rejects out-of-domain points") {
    const BurgersConfig cfg;
    CHECK_THROWS_AS(burgers_solution(-0.1, 0.0, cfg), InvalidArgument);
    CHECK_THROWS_AS(burgers_solution(1.1, 0.0, cfg), InvalidArgument);
    CHECK_THROWS_AS(burgers_solution(0.5, -1.0, cfg), InvalidArgument);
    CHECK_THROWS_AS(burgers_solution(0.5, 2.5, cfg), InvalidArgument);
}

TEST_CASE("burgers initial slice matches the stated initial condition") {
    BurgersConfig cfg;
    cfg.grid_points = 64;
    cfg.n_snapshots = 5;
    const DenseMatrix a = burgers_matrix(cfg);
    const double t0 = std::exp(cfg.reynolds / 8.0);
    for (Index i = 0; i < cfg.grid_points; ++i) {
        const double x = cfg.grid_x(i);
        const double expected = x / (1.0 + std::sqrt(1.0 / t0) * std::exp(cfg.reynolds * x * x / 4.0));
        CHECK(std::abs(a(i, 0) - expected) <= 1e-15 * std::max(1.0, std::abs(expected)) + 1e-300);
    }
    CHECK(cfg.snapshot_t(cfg.n_snapshots - 1) == cfg.t_final);
    CHECK(cfg.grid_x(cfg.grid_points - 1) == cfg.length);
}

TEST_CASE("burgers agrees with a finite-difference solve") {
    BurgersConfig cfg;
    const double nu = 1.0 / cfg.reynolds;
    const std::vector<double> times{0.0, 0.5, 1.0};
    const auto fd = oracle::fd_burgers(
        cfg.length, nu, 256, 8, times, [&](double x) { return burgers_solution(x, 0.0, cfg); },
        [&](double x, double t) { return burgers_solution(x, t, cfg); });
    const double dx = cfg.length / 255.0;
    double worst = 0.0;
    for (Index k = 0; k < times.size(); ++k)
        for (Index i = 0; i < 256; ++i)
            worst = std::max(worst, std::abs(fd[k][i] - burgers_solution(static_cast<double>(i) * dx, times[k], cfg)));
    MESSAGE("max |fd - analytical| = " << worst);
    CHECK(worst <= 2e-3);
}

TEST_CASE("burgers matrix shape and columns") {
    BurgersConfig cfg;
    const DenseMatrix a = burgers_matrix(cfg);
    CHECK(a.rows() == 16384);
    CHECK(a.cols() == 800);
    for (Index j = 0; j < a.cols(); ++j) {
        double norm = 0.0;
        for (double v : a.col(j)) norm += v * v;
        CHECK((std::isfinite(norm) && norm > 0.0));
    }
    CHECK(burgers_matrix(cfg) == a);
}

TEST_CASE("burgers capacity cap and config validation") {
    BurgersConfig cfg;
    cfg.max_bytes = 1024;
    CHECK_THROWS_AS(burgers_matrix(cfg), CapacityError);
    cfg = BurgersConfig{};
    cfg.grid_points = 1;
    CHECK_THROWS_AS(burgers_matrix(cfg), InvalidArgument);
}

TEST_CASE("synthetic spectrum matrices") {
    const std::vector<double> one{1.0};
    const DenseMatrix r1 = synthetic_spectrum_matrix(5, 4, one, 7);
    CHECK(std::abs(svd_full(r1, false).s[0] - 1.0) <= 1e-12);

    const std::vector<double> sigma{3.0, 2.0, 1.0};
    const DenseMatrix a = synthetic_spectrum_matrix(6, 4, sigma, 8);
    const SvdResult svd = svd_full(a, false);
    const oracle::Eigen eig = oracle::jacobi_eigen(oracle::gram(a));
    for (Index k = 0; k < 3; ++k) {
        CHECK(std::abs(svd.s[k] - sigma[k]) <= 1e-10);
        CHECK(std::abs(std::sqrt(eig.values[k]) - sigma[k]) <= 1e-10);
    }

    const std::vector<double> zeros(3, 0.0);
    CHECK(synthetic_spectrum_matrix(4, 3, zeros, 1).max_abs() == 0.0);

    const std::vector<double> rising{1.0, 2.0};
    CHECK_THROWS_AS(synthetic_spectrum_matrix(4, 3, rising, 1), InvalidArgument);
    const std::vector<double> negative{1.0, -1.0};
    CHECK_THROWS_AS(synthetic_spectrum_matrix(4, 3, negative, 1), InvalidArgument);
    const std::vector<double> too_many(4, 1.0);
    CHECK_THROWS_AS(synthetic_spectrum_matrix(4, 3, too_many, 1), InvalidArgument);
}

TEST_CASE("row partition") {
    CHECK(row_partition_sizes(10, 4) == std::vector<Index>{3, 3, 2, 2});
    CHECK(row_partition_sizes(16384, 16) == std::vector<Index>(16, 1024));

    BurgersConfig cfg;
    cfg.grid_points = 10;
    cfg.n_snapshots = 3;
    const DenseMatrix a = burgers_matrix(cfg);
    const auto one = row_partition(a, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == a);

    const auto blocks = row_partition(a, 4);
    CHECK(concat_rows(blocks) == a);
    CHECK_THROWS_AS(row_partition(a, 11), InvalidArgument);
    CHECK_THROWS_AS(row_partition(a, 0), InvalidArgument);
}
