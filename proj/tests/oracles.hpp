#pragma once

// Reference implementations used only to check the library. Each one is
// written from scratch against plain std::vector storage so that a bug in a
// library kernel cannot leak into the value it is compared with.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <utility>
#include <vector>

#include "parsvd/matrix.hpp"

namespace oracle {

using parsvd::DenseMatrix;
using parsvd::Index;

// Row-major working copy.
using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const DenseMatrix& a) {
    Rows out(a.rows(), std::vector<double>(a.cols()));
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) out[i][j] = a(i, j);
    return out;
}

inline DenseMatrix from_rows(const Rows& r, Index cols) {
    DenseMatrix out(r.size(), cols);
    for (Index i = 0; i < r.size(); ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = r[i][j];
    return out;
}

inline DenseMatrix triple_loop_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    const Rows x = to_rows(a), y = to_rows(b);
    Rows z(a.rows(), std::vector<double>(b.cols(), 0.0));
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (Index k = 0; k < a.cols(); ++k) acc += x[i][k] * y[k][j];
            z[i][j] = acc;
        }
    return from_rows(z, b.cols());
}

struct Qr {
    DenseMatrix q, r;
};

// Modified Gram-Schmidt for full column rank input (rows >= cols).
inline Qr mgs_qr(const DenseMatrix& a) {
    const Index m = a.rows(), n = a.cols();
    std::vector<std::vector<double>> v(n, std::vector<double>(m));
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) v[j][i] = a(i, j);
    DenseMatrix q(m, n), r(n, n);
    for (Index j = 0; j < n; ++j) {
        double norm = 0.0;
        for (double x : v[j]) norm += x * x;
        norm = std::sqrt(norm);
        r(j, j) = norm;
        for (Index i = 0; i < m; ++i) q(i, j) = v[j][i] / norm;
        for (Index k = j + 1; k < n; ++k) {
            double dot = 0.0;
            for (Index i = 0; i < m; ++i) dot += q(i, j) * v[k][i];
            r(j, k) = dot;
            for (Index i = 0; i < m; ++i) v[k][i] -= dot * q(i, j);
        }
    }
    return {q, r};
}

struct Eigen {
    std::vector<double> values;  // descending
    DenseMatrix vectors;         // columns match values
};

// Cyclic two-sided Jacobi rotations on a symmetric matrix.
inline Eigen jacobi_eigen(const DenseMatrix& sym) {
    const Index n = sym.rows();
    Rows a = to_rows(sym);
    Rows v(n, std::vector<double>(n, 0.0));
    for (Index i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, total = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                total += a[i][j] * a[i][j];
                if (i != j) off += a[i][j] * a[i][j];
            }
        if (off <= 1e-32 * total || off == 0.0) break;
        for (Index p = 0; p < n; ++p)
            for (Index q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Index k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (Index k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (Index k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a[x][x] > a[y][y]; });
    Eigen out{std::vector<double>(n), DenseMatrix(n, n)};
    for (Index j = 0; j < n; ++j) {
        out.values[j] = a[order[j]][order[j]];
        for (Index i = 0; i < n; ++i) out.vectors(i, j) = v[i][order[j]];
    }
    return out;
}

inline DenseMatrix gram(const DenseMatrix& a) { return triple_loop_matmul(a.transpose(), a); }

// Largest |a_ij - b_ij| after flipping each column of b toward a.
inline double aligned_max_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double worst = 0.0;
    for (Index j = 0; j < a.cols(); ++j) {
        double dot = 0.0;
        for (Index i = 0; i < a.rows(); ++i) dot += a(i, j) * b(i, j);
        const double sign = dot < 0 ? -1.0 : 1.0;
        for (Index i = 0; i < a.rows(); ++i) worst = std::max(worst, std::abs(a(i, j) - sign * b(i, j)));
    }
    return worst;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    double worst = 0.0;
    for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

// max |a^T a - I|
inline double orthonormality(const DenseMatrix& a) {
    const DenseMatrix g = gram(a);
    double worst = 0.0;
    for (Index i = 0; i < g.rows(); ++i)
        for (Index j = 0; j < g.cols(); ++j) worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

inline double frobenius(const DenseMatrix& a) {
    double acc = 0.0;
    for (double x : a.data()) acc += x * x;
    return std::sqrt(acc);
}

inline DenseMatrix minus(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows(), a.cols());
    for (Index i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

// u diag(s) vt
inline DenseMatrix usv(const DenseMatrix& u, const std::vector<double>& s, const DenseMatrix& vt) {
    DenseMatrix us = u;
    for (Index j = 0; j < s.size(); ++j)
        for (Index i = 0; i < u.rows(); ++i) us(i, j) *= s[j];
    return triple_loop_matmul(us, vt);
}

// WireMatrix bytes built by hand: u64 rows, u64 cols, f64 data, all LE.
inline std::vector<unsigned char> wire_bytes(const DenseMatrix& m) {
    std::vector<unsigned char> out;
    auto put64 = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
    };
    put64(m.rows());
    put64(m.cols());
    for (double x : m.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        put64(bits);
    }
    return out;
}

// Viscous Burgers u_t + (u^2/2)_x = nu u_xx on [0, length] by central
// differences and Heun time stepping, on a grid `refine` times finer than
// the `points`-point output grid. Dirichlet data come from `boundary`.
template <class Boundary, class Initial>
std::vector<std::vector<double>> fd_burgers(double length, double nu, Index points, Index refine,
                                            const std::vector<double>& times, Initial initial, Boundary boundary) {
    const Index n = (points - 1) * refine + 1;
    const double dx = length / static_cast<double>(n - 1);
    std::vector<double> u(n);
    for (Index i = 0; i < n; ++i) u[i] = initial(static_cast<double>(i) * dx);

    auto rhs = [&](const std::vector<double>& w, std::vector<double>& out) {
        out.assign(n, 0.0);
        for (Index i = 1; i + 1 < n; ++i) {
            const double flux = (w[i + 1] * w[i + 1] - w[i - 1] * w[i - 1]) / (4.0 * dx);
            out[i] = -flux + nu * (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dx * dx);
        }
    };

    std::vector<std::vector<double>> snaps;
    double t = 0.0;
    std::vector<double> k1, k2, mid(n);
    for (double target : times) {
        while (t < target - 1e-15) {
            double umax = 1e-12;
            for (double x : u) umax = std::max(umax, std::abs(x));
            double dt = std::min(0.2 * dx * dx / nu, 0.2 * dx / umax);
            dt = std::min(dt, target - t);
            rhs(u, k1);
            for (Index i = 0; i < n; ++i) mid[i] = u[i] + dt * k1[i];
            mid[0] = boundary(0.0, t + dt);
            mid[n - 1] = boundary(length, t + dt);
            rhs(mid, k2);
            for (Index i = 1; i + 1 < n; ++i) u[i] += 0.5 * dt * (k1[i] + k2[i]);
            t += dt;
            u[0] = boundary(0.0, t);
            u[n - 1] = boundary(length, t);
        }
        std::vector<double> coarse(points);
        for (Index i = 0; i < points; ++i) coarse[i] = u[i * refine];
        snaps.push_back(std::move(coarse));
    }
    return snaps;
}

}  // namespace oracle
