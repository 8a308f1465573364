#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parsvd/matrix.hpp"

namespace parsvd::io {

// MatrixFile: "PARSVD01" | u64 rows | u64 cols | rows*cols f64, little-endian, column-major.
inline constexpr char kMagic[8] = {'P', 'A', 'R', 'S', 'V', 'D', '0', '1'};
inline constexpr std::size_t kFileHeaderBytes = 24;

void write_matrix(const std::filesystem::path& path, const DenseMatrix& a);
DenseMatrix read_matrix(const std::filesystem::path& path);
// Rows [row_first, row_first + row_count) of every column.
DenseMatrix read_rows(const std::filesystem::path& path, Index row_first, Index row_count);

struct MatrixShape {
    Index rows = 0;
    Index cols = 0;
};

// Validates magic and total size without reading the payload.
MatrixShape read_shape(const std::filesystem::path& path);

//
// Column batches of a matrix, in order. A file-backed source reads only the
// current batch's columns, so resident memory is one batch plus the header.
//
class BatchSource {
public:
    static BatchSource from_file(const std::filesystem::path& path, Index batch_columns);
    // Only rows [row_first, row_first + row_count) of each batch.
    static BatchSource from_file_rows(const std::filesystem::path& path, Index batch_columns, Index row_first,
                                      Index row_count);
    static BatchSource from_matrix(DenseMatrix a, Index batch_columns);

    BatchSource(BatchSource&&) noexcept;
    BatchSource& operator=(BatchSource&&) noexcept;
    ~BatchSource();

    Index rows() const noexcept { return shape_.rows; }
    Index cols() const noexcept { return shape_.cols; }
    Index batch_columns() const noexcept { return batch_; }
    Index cursor() const noexcept { return cursor_; }
    Index batch_count() const noexcept;

    // Next batch, or nullopt once every column has been returned.
    std::optional<DenseMatrix> next();

private:
    BatchSource() = default;

    std::FILE* file_ = nullptr;
    std::filesystem::path path_;
    std::optional<DenseMatrix> memory_;
    MatrixShape shape_;  // of the batches produced
    Index file_rows_ = 0;
    Index row_first_ = 0;
    Index batch_ = 1;
    Index cursor_ = 0;
};

// Drains a source into a list (tests and small inputs).
std::vector<DenseMatrix> read_batches(BatchSource& src);

// 17 significant digits, round-trip exact for doubles.
std::string format_real(double v);

void emit_singular_values(const std::filesystem::path& path, std::span<const double> s);
// One row per streaming iteration: iteration, s_1..s_K.
void emit_singular_value_history(const std::filesystem::path& path, const std::vector<std::vector<double>>& history);
void emit_modes(const std::filesystem::path& path, std::span<const double> grid, const DenseMatrix& u);
void emit_mode_plot(const std::filesystem::path& path, std::span<const double> grid, const DenseMatrix& u, Index column);

struct ModesTable {
    std::vector<double> grid;
    DenseMatrix u;
};
ModesTable read_modes(const std::filesystem::path& path);
std::vector<double> read_singular_values(const std::filesystem::path& path);

struct ModeComparison {
    Index mode = 0;  // 1-based
    double max_abs_error = 0.0;
    double angle = 0.0;  // radians, between the sign-aligned columns
};

struct ComparisonReport {
    std::vector<ModeComparison> modes;
    double subspace_angle = 0.0;  // largest principal angle between the spans
    double max_abs_error() const noexcept;
    double max_angle() const noexcept;
    bool passes(double threshold) const noexcept;
};

// Flips each parallel column whose inner product with the serial column is
// negative, then measures per-mode and whole-subspace disagreement.
ComparisonReport compare_modes(const DenseMatrix& u_serial, const DenseMatrix& u_parallel);
ComparisonReport emit_comparison(const std::filesystem::path& path, const DenseMatrix& u_serial,
                                 const DenseMatrix& u_parallel);

}  // namespace parsvd::io
