#include "parsvd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "parsvd/error.hpp"
#include "parsvd/random.hpp"

namespace parsvd {

namespace {

// Four interleaved partial sums; fixed order keeps results reproducible.
double dot(const double* x, const double* y, Index n) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    Index i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) s0 += x[i] * y[i];
    return (s0 + s1) + (s2 + s3);
}

// Overflow-safe 2-norm.
double norm2(const double* x, Index n) noexcept {
    double scale = 0.0, ssq = 1.0;
    for (Index i = 0; i < n; ++i) {
        if (x[i] == 0.0) continue;
        const double a = std::abs(x[i]);
        if (scale < a) {
            ssq = 1.0 + ssq * (scale / a) * (scale / a);
            scale = a;
        } else {
            ssq += (a / scale) * (a / scale);
        }
    }
    return scale * std::sqrt(ssq);
}

void require_factorizable(const DenseMatrix& a, const char* op) {
    if (a.rows() == 0 || a.cols() == 0)
        throw InvalidArgument(std::string(op) + ": matrix has a zero dimension (" + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + ")");
    if (!a.all_finite()) throw InvalidArgument(std::string(op) + ": matrix contains non-finite entries");
}

bool is_upper_triangular(const DenseMatrix& a) {
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = j + 1; i < a.rows(); ++i)
            if (a(i, j) != 0.0) return false;
    return true;
}

// Hestenes one-sided Jacobi: rotates columns of w until mutually orthogonal,
// accumulating the same rotations into v when given.
void one_sided_jacobi(DenseMatrix& w, DenseMatrix* v, const JacobiOptions& opts) {
    const Index m = w.rows();
    const Index n = w.cols();
    const double fro = w.frobenius_norm();
    if (fro == 0.0 || n < 2) return;
    const double fro2 = fro * fro;
    const double rel_tol = std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(m));
    const double abs_floor = 1e-16 * fro2;

    std::vector<double> norms(n);
    double off = 0.0;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (Index j = 0; j < n; ++j) {
            const double* c = w.col(j).data();
            norms[j] = dot(c, c, m);
        }
        double off2 = 0.0;
        Index rotations = 0;
        for (Index p = 0; p + 1 < n; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double a = norms[p];
                const double b = norms[q];
                if (a == 0.0 || b == 0.0) continue;
                double* wp = w.col(p).data();
                double* wq = w.col(q).data();
                const double g = dot(wp, wq, m);
                if (std::abs(g) <= rel_tol * std::sqrt(a * b) || std::abs(g) <= abs_floor) continue;
                off2 += g * g;
                ++rotations;
                const double zeta = (b - a) / (2.0 * g);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Index i = 0; i < m; ++i) {
                    const double x = wp[i];
                    const double y = wq[i];
                    wp[i] = c * x - s * y;
                    wq[i] = s * x + c * y;
                }
                if (v) {
                    double* vp = v->col(p).data();
                    double* vq = v->col(q).data();
                    for (Index i = 0; i < v->rows(); ++i) {
                        const double x = vp[i];
                        const double y = vq[i];
                        vp[i] = c * x - s * y;
                        vq[i] = s * x + c * y;
                    }
                }
                norms[p] = a - t * g;
                norms[q] = b + t * g;
            }
        }
        off = std::sqrt(off2);
        if (rotations == 0 || off <= opts.off_tolerance * fro2) return;
    }
    // residual of the state actually returned, not of the last sweep's input
    double left2 = 0.0;
    for (Index p = 0; p + 1 < n; ++p)
        for (Index q = p + 1; q < n; ++q) {
            const double g = dot(w.col(p).data(), w.col(q).data(), m);
            left2 += g * g;
        }
    off = std::sqrt(left2);
    throw ConvergenceError("svd_full: Jacobi did not converge in " + std::to_string(opts.max_sweeps) +
                               " sweeps, relative off-diagonal residual " + std::to_string(off / fro2),
                           off / fro2);
}

// Normalizes the columns of w into u (descending-sigma order given by perm),
// re-orthogonalizing twice so tiny or null directions still yield an
// orthonormal set.
DenseMatrix orthonormal_left_vectors(const DenseMatrix& w, std::span<const Index> perm, std::span<const double> sigma) {
    const Index m = w.rows();
    const Index k = perm.size();
    DenseMatrix u(m, k);
    std::vector<double> cand(m);
    Index cursor = 0;

    auto project_out = [&](double* x, Index upto) {
        for (Index i = 0; i < upto; ++i) {
            const double* ui = u.col(i).data();
            const double d = dot(ui, x, m);
            for (Index r = 0; r < m; ++r) x[r] -= d * ui[r];
        }
    };

    for (Index j = 0; j < k; ++j) {
        double* uj = u.col(j).data();
        bool accepted = false;
        if (sigma[j] > 0.0) {
            const double* src = w.col(perm[j]).data();
            for (Index r = 0; r < m; ++r) uj[r] = src[r] / sigma[j];
            project_out(uj, j);
            double nrm = norm2(uj, m);
            if (nrm > 1e-10) {
                for (Index r = 0; r < m; ++r) uj[r] /= nrm;
                project_out(uj, j);
                nrm = norm2(uj, m);
                for (Index r = 0; r < m; ++r) uj[r] /= nrm;
                accepted = true;
            }
        }
        if (accepted) continue;
        // Completion from unit vectors. Some e_i keeps a residual of at least
        // sqrt((m - j) / m), so the scan always accepts one.
        const double needed = 0.5 * std::sqrt(static_cast<double>(m - j) / static_cast<double>(m));
        for (Index step = 0; step < m; ++step) {
            const Index e = (cursor + step) % m;
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[e] = 1.0;
            project_out(cand.data(), j);
            project_out(cand.data(), j);
            const double nrm = norm2(cand.data(), m);
            if (nrm >= needed) {
                for (Index r = 0; r < m; ++r) uj[r] = cand[r] / nrm;
                cursor = e + 1;
                break;
            }
        }
    }
    return u;
}

struct SquareSvd {
    DenseMatrix u;  // orthonormal, w.rows() x n
    std::vector<double> s;
    DenseMatrix v;  // n x n when accumulated
};

// SVD of a matrix with rows >= cols by one-sided Jacobi on its columns.
SquareSvd jacobi_svd_raw(DenseMatrix w, bool want_v, const JacobiOptions& opts) {
    const Index n = w.cols();
    DenseMatrix v;
    if (want_v) v = DenseMatrix::identity(n);
    one_sided_jacobi(w, want_v ? &v : nullptr, opts);

    std::vector<double> sigma(n);
    for (Index j = 0; j < n; ++j) sigma[j] = norm2(w.col(j).data(), w.rows());
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::stable_sort(perm.begin(), perm.end(), [&](Index x, Index y) { return sigma[x] > sigma[y]; });

    SquareSvd out;
    out.s.resize(n);
    for (Index j = 0; j < n; ++j) out.s[j] = sigma[perm[j]];
    out.u = orthonormal_left_vectors(w, perm, out.s);
    if (want_v) {
        out.v = DenseMatrix(n, n);
        for (Index j = 0; j < n; ++j) std::copy(v.col(perm[j]).begin(), v.col(perm[j]).end(), out.v.col(j).begin());
    }
    return out;
}

// SVD of a square upper-triangular factor r. Jacobi runs on l = r2^T from
// r^T = q2 r2, whose graded column norms make the sweeps converge much
// faster: r = l q2^T, so r = u s (q2 v)^T.
SquareSvd triangular_svd(const DenseMatrix& r, bool want_v, const JacobiOptions& opts) {
    if (r.rows() != r.cols()) return jacobi_svd_raw(r, want_v, opts);
    QrResult second = qr_factor(r.transpose());
    SquareSvd core = jacobi_svd_raw(second.r.transpose(), want_v, opts);
    if (want_v) core.v = matmul(second.q, core.v);
    return core;
}

}  // namespace

void RandomSketchConfig::validate(Index rows, Index cols) const {
    if (target_rank == 0) throw InvalidArgument("sketch: target rank must be at least 1");
    const Index limit = std::min(rows, cols);
    if (sketch_width() > limit)
        throw InvalidArgument("sketch: target rank + oversampling = " + std::to_string(sketch_width()) +
                              " exceeds min dimension " + std::to_string(limit));
}

QrResult qr_factor(const DenseMatrix& a) {
    require_factorizable(a, "qr_factor");
    const Index m = a.rows();
    const Index n = a.cols();
    const Index k = std::min(m, n);

    DenseMatrix w = a;
    std::vector<double> tau(k, 0.0);
    for (Index j = 0; j < k; ++j) {
        double* cj = w.col(j).data();
        const double tail = norm2(cj + j + 1, m - j - 1);
        if (tail == 0.0) continue;
        const double alpha = cj[j];
        const double nrm = std::hypot(alpha, tail);
        const double beta = alpha >= 0.0 ? -nrm : nrm;
        tau[j] = (beta - alpha) / beta;
        const double scale = 1.0 / (alpha - beta);
        for (Index i = j + 1; i < m; ++i) cj[i] *= scale;
        cj[j] = beta;
        for (Index c = j + 1; c < n; ++c) {
            double* cc = w.col(c).data();
            double d = cc[j];
            for (Index i = j + 1; i < m; ++i) d += cj[i] * cc[i];
            d *= tau[j];
            cc[j] -= d;
            for (Index i = j + 1; i < m; ++i) cc[i] -= d * cj[i];
        }
    }

    QrResult out{DenseMatrix(m, k), DenseMatrix(k, n)};
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i <= std::min(j, k - 1); ++i) out.r(i, j) = w(i, j);
    for (Index j = 0; j < k; ++j) out.q(j, j) = 1.0;
    for (Index jj = k; jj-- > 0;) {
        if (tau[jj] == 0.0) continue;
        const double* v = w.col(jj).data();
        for (Index c = jj; c < k; ++c) {
            double* qc = out.q.col(c).data();
            double d = qc[jj];
            for (Index i = jj + 1; i < m; ++i) d += v[i] * qc[i];
            d *= tau[jj];
            qc[jj] -= d;
            for (Index i = jj + 1; i < m; ++i) qc[i] -= d * v[i];
        }
    }
    for (Index i = 0; i < k; ++i) {
        if (out.r(i, i) >= 0.0) continue;
        for (Index j = i; j < n; ++j) out.r(i, j) = -out.r(i, j);
        for (double& x : out.q.col(i)) x = -x;
    }
    return out;
}

SvdResult svd_full(const DenseMatrix& a, bool want_vt, const JacobiOptions& opts) {
    require_factorizable(a, "svd_full");
    SvdResult out;
    if (a.rows() >= a.cols()) {
        if (is_upper_triangular(a)) {
            SquareSvd core = triangular_svd(a, want_vt, opts);
            out.u = std::move(core.u);
            out.s = std::move(core.s);
            if (want_vt) out.vt = core.v.transpose();
        } else {
            QrResult qr = qr_factor(a);
            SquareSvd core = triangular_svd(std::move(qr.r), want_vt, opts);
            out.u = matmul(qr.q, core.u);
            out.s = std::move(core.s);
            if (want_vt) out.vt = core.v.transpose();
        }
    } else {
        // a^T = Q U_r S V^T, hence a = V S (Q U_r)^T
        QrResult qr = qr_factor(a.transpose());
        SquareSvd core = triangular_svd(std::move(qr.r), true, opts);
        out.u = std::move(core.v);
        out.s = std::move(core.s);
        if (want_vt) out.vt = matmul(qr.q, core.u).transpose();
    }
    normalize_signs(out.u, out.vt ? &*out.vt : nullptr);
    return out;
}

void normalize_signs(DenseMatrix& u, DenseMatrix* vt) {
    for (Index j = 0; j < u.cols(); ++j) {
        auto c = u.col(j);
        Index best = 0;
        for (Index i = 1; i < c.size(); ++i)
            if (std::abs(c[i]) > std::abs(c[best])) best = i;
        if (c.empty() || c[best] >= 0.0) continue;
        for (double& x : c) x = -x;
        if (vt)
            for (Index col = 0; col < vt->cols(); ++col) (*vt)(j, col) = -(*vt)(j, col);
    }
}

DenseMatrix randomized_range(const DenseMatrix& a, const RandomSketchConfig& cfg) {
    require_factorizable(a, "randomized_range");
    cfg.validate(a.rows(), a.cols());
    const DenseMatrix omega = gaussian_matrix(a.cols(), cfg.sketch_width(), cfg.seed);
    DenseMatrix y = matmul(a, omega);
    for (Index it = 0; it < cfg.power_iterations; ++it) {
        // re-orthonormalize between applications of a and a^T
        const DenseMatrix q = qr_factor(y).q;
        const DenseMatrix z = qr_factor(matmul_tn(a, q)).q;
        y = matmul(a, z);
    }
    return qr_factor(y).q;
}

SvdResult low_rank_svd(const DenseMatrix& a, const RandomSketchConfig& cfg, bool want_vt) {
    const DenseMatrix q = randomized_range(a, cfg);
    const DenseMatrix projected = matmul_tn(q, a);
    SvdResult small = svd_full(projected, want_vt);
    SvdResult out;
    out.u = matmul(q, small.u.col_range(0, cfg.target_rank));
    out.s.assign(small.s.begin(), small.s.begin() + static_cast<std::ptrdiff_t>(cfg.target_rank));
    if (want_vt) out.vt = small.vt->row_range(0, cfg.target_rank);
    normalize_signs(out.u, out.vt ? &*out.vt : nullptr);
    return out;
}

SvdResult truncate(const SvdResult& svd, Index k) {
    if (k > svd.s.size())
        throw InvalidArgument("truncate: requested " + std::to_string(k) + " of " + std::to_string(svd.s.size()) +
                              " singular triplets");
    SvdResult out;
    out.u = svd.u.col_range(0, k);
    out.s.assign(svd.s.begin(), svd.s.begin() + static_cast<std::ptrdiff_t>(k));
    if (svd.vt) out.vt = svd.vt->row_range(0, k);
    return out;
}

DenseMatrix reconstruct(const SvdResult& svd) {
    if (!svd.vt) throw InvalidArgument("reconstruct: right singular vectors were not computed");
    return matmul(scale_columns(svd.u, svd.s), *svd.vt);
}

}  // namespace parsvd
