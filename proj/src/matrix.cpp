#include "parsvd/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parsvd/error.hpp"

namespace parsvd {

namespace {

std::string shape(const DenseMatrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(Index rows, Index cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(Index rows, Index cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw InvalidArgument("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                              std::to_string(rows_) + "x" + std::to_string(cols_));
    if (!all_finite()) throw InvalidArgument("matrix contains non-finite entries");
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const Index m = rows.size();
    const Index n = m == 0 ? 0 : rows.begin()->size();
    std::vector<double> data(m * n);
    Index i = 0;
    for (const auto& row : rows) {
        if (row.size() != n) throw InvalidArgument("ragged row literal");
        Index j = 0;
        for (double v : row) data[j++ * m + i] = v;
        ++i;
    }
    return DenseMatrix(m, n, std::move(data));
}

DenseMatrix DenseMatrix::identity(Index n) {
    DenseMatrix out(n, n);
    for (Index i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
    DenseMatrix out(d.size(), d.size());
    for (Index i = 0; i < d.size(); ++i) out(i, i) = d[i];
    return out;
}

DenseMatrix DenseMatrix::column(std::span<const double> v) {
    return DenseMatrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix out(cols_, rows_);
    for (Index j = 0; j < cols_; ++j)
        for (Index i = 0; i < rows_; ++i) out(j, i) = (*this)(i, j);
    return out;
}

DenseMatrix DenseMatrix::col_range(Index first, Index count) const {
    if (first + count > cols_) throw InvalidArgument("column range exceeds " + shape(*this));
    DenseMatrix out(rows_, count);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * rows_), count * rows_, out.data_.begin());
    return out;
}

DenseMatrix DenseMatrix::row_range(Index first, Index count) const {
    if (first + count > rows_) throw InvalidArgument("row range exceeds " + shape(*this));
    DenseMatrix out(count, cols_);
    for (Index j = 0; j < cols_; ++j)
        for (Index i = 0; i < count; ++i) out(i, j) = (*this)(first + i, j);
    return out;
}

double DenseMatrix::frobenius_norm() const noexcept {
    // scaled accumulation, avoids overflow for large entries
    double scale = 0.0, ssq = 1.0;
    for (double v : data_) {
        if (v == 0.0) continue;
        const double a = std::abs(v);
        if (scale < a) {
            ssq = 1.0 + ssq * (scale / a) * (scale / a);
            scale = a;
        } else {
            ssq += (a / scale) * (a / scale);
        }
    }
    return scale * std::sqrt(ssq);
}

double DenseMatrix::max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool DenseMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw InvalidArgument("matmul: cannot multiply " + shape(a) + " by " + shape(b));
    DenseMatrix out(a.rows(), b.cols());
    const Index m = a.rows();
    for (Index j = 0; j < b.cols(); ++j) {
        double* oc = out.col(j).data();
        for (Index p = 0; p < a.cols(); ++p) {
            const double bpj = b(p, j);
            if (bpj == 0.0) continue;
            const double* ac = a.col(p).data();
            for (Index i = 0; i < m; ++i) oc[i] += ac[i] * bpj;
        }
    }
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows())
        throw InvalidArgument("matmul_tn: cannot multiply transpose of " + shape(a) + " by " + shape(b));
    DenseMatrix out(a.cols(), b.cols());
    const Index m = a.rows();
    for (Index j = 0; j < b.cols(); ++j) {
        const double* bc = b.col(j).data();
        for (Index i = 0; i < a.cols(); ++i) {
            const double* ac = a.col(i).data();
            double s = 0.0;
            for (Index k = 0; k < m; ++k) s += ac[k] * bc[k];
            out(i, j) = s;
        }
    }
    return out;
}

DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b) {
    const DenseMatrix parts[] = {a, b};
    return concat_cols(parts);
}

DenseMatrix concat_rows(const DenseMatrix& a, const DenseMatrix& b) {
    const DenseMatrix parts[] = {a, b};
    return concat_rows(parts);
}

DenseMatrix concat_cols(std::span<const DenseMatrix> parts) {
    if (parts.empty()) return {};
    const Index m = parts.front().rows();
    Index n = 0;
    for (const auto& p : parts) {
        if (p.rows() != m) throw InvalidArgument("concat_cols: row mismatch " + shape(parts.front()) + " vs " + shape(p));
        n += p.cols();
    }
    DenseMatrix out(m, n);
    auto dst = out.data().begin();
    for (const auto& p : parts) dst = std::copy(p.data().begin(), p.data().end(), dst);
    return out;
}

DenseMatrix concat_rows(std::span<const DenseMatrix> parts) {
    if (parts.empty()) return {};
    const Index n = parts.front().cols();
    Index m = 0;
    for (const auto& p : parts) {
        if (p.cols() != n) throw InvalidArgument("concat_rows: column mismatch " + shape(parts.front()) + " vs " + shape(p));
        m += p.rows();
    }
    DenseMatrix out(m, n);
    Index offset = 0;
    for (const auto& p : parts) {
        for (Index j = 0; j < n; ++j)
            std::copy(p.col(j).begin(), p.col(j).end(), out.col(j).begin() + static_cast<std::ptrdiff_t>(offset));
        offset += p.rows();
    }
    return out;
}

DenseMatrix scale_columns(const DenseMatrix& a, std::span<const double> d, double factor) {
    if (d.size() != a.cols()) throw InvalidArgument("scale_columns: " + std::to_string(d.size()) + " scales for " + shape(a));
    DenseMatrix out = a;
    for (Index j = 0; j < a.cols(); ++j) {
        const double s = factor * d[j];
        for (double& v : out.col(j)) v *= s;
    }
    return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidArgument("subtract: shape mismatch " + shape(a) + " vs " + shape(b));
    DenseMatrix out = a;
    auto od = out.data();
    auto bd = b.data();
    for (Index k = 0; k < od.size(); ++k) od[k] -= bd[k];
    return out;
}

double orthonormality_error(const DenseMatrix& a) {
    const DenseMatrix g = matmul_tn(a, a);
    double err = 0.0;
    for (Index j = 0; j < g.cols(); ++j)
        for (Index i = 0; i < g.rows(); ++i) err = std::max(err, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return err;
}

}  // namespace parsvd
