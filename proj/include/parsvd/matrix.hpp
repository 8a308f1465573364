#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace parsvd {

using Index = std::size_t;

//
// Column-major dense real matrix. Zero-sized shapes are representable (they
// travel through files and the wire); numerical kernels reject them.
//
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(Index rows, Index cols);
    // Takes ownership of column-major data; rejects length mismatch and
    // non-finite entries.
    DenseMatrix(Index rows, Index cols, std::vector<double> data);

    // Row-major literal, convenient for small fixed matrices.
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix identity(Index n);
    static DenseMatrix diagonal(std::span<const double> d);
    static DenseMatrix column(std::span<const double> v);

    Index rows() const noexcept { return rows_; }
    Index cols() const noexcept { return cols_; }
    Index size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(Index i, Index j) noexcept { return data_[j * rows_ + i]; }
    double operator()(Index i, Index j) const noexcept { return data_[j * rows_ + i]; }

    std::span<double> col(Index j) noexcept { return {data_.data() + j * rows_, rows_}; }
    std::span<const double> col(Index j) const noexcept { return {data_.data() + j * rows_, rows_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    DenseMatrix transpose() const;
    // Columns [first, first + count).
    DenseMatrix col_range(Index first, Index count) const;
    // Rows [first, first + count).
    DenseMatrix row_range(Index first, Index count) const;

    double frobenius_norm() const noexcept;
    double max_abs() const noexcept;
    bool all_finite() const noexcept;

    // Bitwise equality of shape and payload.
    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// aᵀ·b without materializing the transpose.
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix concat_cols(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix concat_rows(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix concat_cols(std::span<const DenseMatrix> parts);
DenseMatrix concat_rows(std::span<const DenseMatrix> parts);

// a·diag(d)·factor, column j scaled by factor·d[j].
DenseMatrix scale_columns(const DenseMatrix& a, std::span<const double> d, double factor = 1.0);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);

// max |aᵀa − I|.
double orthonormality_error(const DenseMatrix& a);

}  // namespace parsvd
