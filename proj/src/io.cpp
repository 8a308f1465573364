#include "parsvd/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "parsvd/error.hpp"
#include "parsvd/linalg.hpp"
#include "parsvd/wire.hpp"

namespace parsvd::io {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

MatrixShape parse_header(const unsigned char* head, const fs::path& path, std::uintmax_t file_size) {
    if (std::memcmp(head, kMagic, sizeof kMagic) != 0) {
        std::ostringstream msg;
        msg << "'" << path.string() << "' is not a matrix file: magic bytes";
        for (int i = 0; i < 8; ++i) msg << ' ' << std::hex << static_cast<int>(head[i]);
        throw FormatError(msg.str());
    }
    MatrixShape shape{wire::get_u64(reinterpret_cast<const std::byte*>(head + 8)),
                      wire::get_u64(reinterpret_cast<const std::byte*>(head + 16))};
    if (shape.rows != 0 && shape.cols > (UINT64_MAX / 8 - kFileHeaderBytes) / shape.rows)
        throw FormatError("'" + path.string() + "' declares an impossible shape");
    const std::uintmax_t expected = kFileHeaderBytes + 8 * shape.rows * shape.cols;
    if (file_size != expected)
        throw FormatError("'" + path.string() + "' size mismatch: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(file_size));
    return shape;
}

std::uintmax_t file_size_of(const fs::path& path) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
    return size;
}

std::vector<double> decode_reals(const std::vector<unsigned char>& raw) {
    std::vector<double> out(raw.size() / 8);
    const auto* p = reinterpret_cast<const std::byte*>(raw.data());
    for (auto& v : out) {
        v = std::bit_cast<double>(wire::get_u64(p));
        p += 8;
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_real(const std::string& text, const fs::path& path) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
        throw FormatError("'" + path.string() + "': '" + text + "' is not a number");
    return v;
}

}  // namespace

void write_matrix(const fs::path& path, const DenseMatrix& a) {
    auto out = open_out(path, std::ios::binary);
    wire::Bytes head;
    for (char c : kMagic) head.push_back(static_cast<std::byte>(c));
    wire::put_u64(head, a.rows());
    wire::put_u64(head, a.cols());
    out.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
    const wire::Bytes body = wire::encode_matrix(a);
    out.write(reinterpret_cast<const char*>(body.data()) + wire::kMatrixHeaderBytes,
              static_cast<std::streamsize>(body.size() - wire::kMatrixHeaderBytes));
    finish(out, path);
}

MatrixShape read_shape(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    const auto size = file_size_of(path);
    unsigned char head[kFileHeaderBytes] = {};
    in.read(reinterpret_cast<char*>(head), kFileHeaderBytes);
    if (in.gcount() < 8) throw FormatError("'" + path.string() + "' is too short to be a matrix file");
    if (static_cast<std::size_t>(in.gcount()) < kFileHeaderBytes) {
        parse_header(head, path, size);  // reports magic first
        throw FormatError("'" + path.string() + "' size mismatch: expected at least 24 bytes, found " +
                          std::to_string(size));
    }
    return parse_header(head, path, size);
}

DenseMatrix read_matrix(const fs::path& path) {
    const MatrixShape shape = read_shape(path);
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(kFileHeaderBytes));
    std::vector<unsigned char> raw(8 * shape.rows * shape.cols);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IoError("short read from '" + path.string() + "'");
    try {
        return DenseMatrix(shape.rows, shape.cols, decode_reals(raw));
    } catch (const InvalidArgument& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

BatchSource BatchSource::from_file(const fs::path& path, Index batch_columns) {
    if (batch_columns == 0) throw InvalidArgument("batch source: batch width must be at least 1");
    return from_file_rows(path, batch_columns, 0, read_shape(path).rows);
}

BatchSource BatchSource::from_file_rows(const fs::path& path, Index batch_columns, Index row_first, Index row_count) {
    if (batch_columns == 0) throw InvalidArgument("batch source: batch width must be at least 1");
    BatchSource src;
    const MatrixShape shape = read_shape(path);
    if (row_first + row_count > shape.rows)
        throw InvalidArgument("batch source: rows [" + std::to_string(row_first) + ", " +
                              std::to_string(row_first + row_count) + ") exceed " + std::to_string(shape.rows));
    src.shape_ = {row_count, shape.cols};
    src.file_rows_ = shape.rows;
    src.row_first_ = row_first;
    src.path_ = path;
    src.batch_ = batch_columns;
    src.file_ = std::fopen(path.c_str(), "rb");
    if (src.file_ == nullptr) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    return src;
}

DenseMatrix read_rows(const fs::path& path, Index row_first, Index row_count) {
    const MatrixShape shape = read_shape(path);
    auto src = BatchSource::from_file_rows(path, std::max<Index>(shape.cols, 1), row_first, row_count);
    auto all = src.next();
    return all ? std::move(*all) : DenseMatrix(row_count, 0);
}

BatchSource BatchSource::from_matrix(DenseMatrix a, Index batch_columns) {
    if (batch_columns == 0) throw InvalidArgument("batch source: batch width must be at least 1");
    BatchSource src;
    src.shape_ = {a.rows(), a.cols()};
    src.memory_ = std::move(a);
    src.batch_ = batch_columns;
    return src;
}

BatchSource::BatchSource(BatchSource&& other) noexcept
    : file_(std::exchange(other.file_, nullptr)),
      path_(std::move(other.path_)),
      memory_(std::move(other.memory_)),
      shape_(other.shape_),
      file_rows_(other.file_rows_),
      row_first_(other.row_first_),
      batch_(other.batch_),
      cursor_(other.cursor_) {}

BatchSource& BatchSource::operator=(BatchSource&& other) noexcept {
    if (this != &other) {
        if (file_) std::fclose(file_);
        file_ = std::exchange(other.file_, nullptr);
        path_ = std::move(other.path_);
        memory_ = std::move(other.memory_);
        shape_ = other.shape_;
        file_rows_ = other.file_rows_;
        row_first_ = other.row_first_;
        batch_ = other.batch_;
        cursor_ = other.cursor_;
    }
    return *this;
}

BatchSource::~BatchSource() {
    if (file_) std::fclose(file_);
}

Index BatchSource::batch_count() const noexcept { return (shape_.cols + batch_ - 1) / batch_; }

std::optional<DenseMatrix> BatchSource::next() {
    if (cursor_ >= shape_.cols) return std::nullopt;
    const Index width = std::min(batch_, shape_.cols - cursor_);
    DenseMatrix out;
    if (memory_) {
        out = memory_->col_range(cursor_, width);
    } else {
        // column-major: each column's row window is one contiguous run, and a
        // full-height batch is a single run
        std::vector<unsigned char> raw(8 * shape_.rows * width);
        const bool contiguous = shape_.rows == file_rows_;
        const Index runs = contiguous ? 1 : width;
        const std::size_t run_bytes = contiguous ? raw.size() : 8 * shape_.rows;
        for (Index c = 0; c < runs; ++c) {
            const auto offset = static_cast<long>(kFileHeaderBytes + 8 * (file_rows_ * (cursor_ + c) + row_first_));
            if (std::fseek(file_, offset, SEEK_SET) != 0 ||
                std::fread(raw.data() + c * run_bytes, 1, run_bytes, file_) != run_bytes)
                throw IoError("short read from '" + path_.string() + "'");
        }
        try {
            out = DenseMatrix(shape_.rows, width, decode_reals(raw));
        } catch (const InvalidArgument& e) {
            throw FormatError("'" + path_.string() + "': " + e.what());
        }
    }
    cursor_ += width;
    return out;
}

std::vector<DenseMatrix> read_batches(BatchSource& src) {
    std::vector<DenseMatrix> out;
    while (auto b = src.next()) out.push_back(std::move(*b));
    return out;
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void emit_singular_values(const fs::path& path, std::span<const double> s) {
    auto out = open_out(path);
    out << "mode,singular_value\n";
    for (Index i = 0; i < s.size(); ++i) out << (i + 1) << ',' << format_real(s[i]) << '\n';
    finish(out, path);
}

void emit_singular_value_history(const fs::path& path, const std::vector<std::vector<double>>& history) {
    auto out = open_out(path);
    const Index k = history.empty() ? 0 : history.front().size();
    out << "iteration";
    for (Index j = 0; j < k; ++j) out << ",s_" << (j + 1);
    out << '\n';
    for (Index it = 0; it < history.size(); ++it) {
        out << it;
        for (double v : history[it]) out << ',' << format_real(v);
        out << '\n';
    }
    finish(out, path);
}

void emit_modes(const fs::path& path, std::span<const double> grid, const DenseMatrix& u) {
    if (grid.size() != u.rows())
        throw InvalidArgument("emit_modes: grid has " + std::to_string(grid.size()) + " points, modes have " +
                              std::to_string(u.rows()) + " rows");
    auto out = open_out(path);
    out << 'x';
    for (Index j = 0; j < u.cols(); ++j) out << ",mode_" << (j + 1);
    out << '\n';
    for (Index i = 0; i < u.rows(); ++i) {
        out << format_real(grid[i]);
        for (Index j = 0; j < u.cols(); ++j) out << ',' << format_real(u(i, j));
        out << '\n';
    }
    finish(out, path);
}

void emit_mode_plot(const fs::path& path, std::span<const double> grid, const DenseMatrix& u, Index column) {
    if (grid.size() != u.rows() || grid.empty())
        throw InvalidArgument("emit_mode_plot: grid and mode lengths differ or are empty");
    if (column >= u.cols())
        throw InvalidArgument("emit_mode_plot: column " + std::to_string(column) + " out of range");
    constexpr double width = 640, height = 400, margin = 50;
    const auto [xmin_it, xmax_it] = std::minmax_element(grid.begin(), grid.end());
    const auto col = u.col(column);
    const auto [ymin_it, ymax_it] = std::minmax_element(col.begin(), col.end());
    const double xmin = *xmin_it, xmax = *xmax_it > *xmin_it ? *xmax_it : *xmin_it + 1.0;
    const double ymin = *ymin_it, ymax = *ymax_it > *ymin_it ? *ymax_it : *ymin_it + 1.0;
    auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << margin << "\" y=\"" << height - margin + 20 << "\" font-size=\"12\">" << num(xmin)
        << "</text>\n";
    out << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 20
        << "\" font-size=\"12\" text-anchor=\"end\">" << num(xmax) << "</text>\n";
    out << "<text x=\"" << margin - 5 << "\" y=\"" << height - margin << "\" font-size=\"12\" text-anchor=\"end\">"
        << num(ymin) << "</text>\n";
    out << "<text x=\"" << margin - 5 << "\" y=\"" << margin + 4 << "\" font-size=\"12\" text-anchor=\"end\">"
        << num(ymax) << "</text>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << margin / 2 << "\" font-size=\"14\" text-anchor=\"middle\">Mode "
        << (column + 1) << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (Index i = 0; i < grid.size(); ++i) out << (i ? " " : "") << num(px(grid[i])) << ',' << num(py(col[i]));
    out << "\"/>\n</svg>\n";
    finish(out, path);
}

ModesTable read_modes(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    std::string line;
    if (!std::getline(in, line)) throw FormatError("'" + path.string() + "' is empty");
    const Index k = split_csv(line).size() - 1;
    ModesTable table;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != k + 1) throw FormatError("'" + path.string() + "': ragged row");
        table.grid.push_back(parse_real(cells[0], path));
        for (Index j = 0; j < k; ++j) values.push_back(parse_real(cells[j + 1], path));
    }
    const Index m = table.grid.size();
    table.u = DenseMatrix(m, k);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < k; ++j) table.u(i, j) = values[i * k + j];
    return table;
}

std::vector<double> read_singular_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 2) throw FormatError("'" + path.string() + "': expected two columns");
        out.push_back(parse_real(cells[1], path));
    }
    return out;
}

double ComparisonReport::max_abs_error() const noexcept {
    double m = 0.0;
    for (const auto& c : modes) m = std::max(m, c.max_abs_error);
    return m;
}

double ComparisonReport::max_angle() const noexcept {
    double m = subspace_angle;
    for (const auto& c : modes) m = std::max(m, c.angle);
    return m;
}

bool ComparisonReport::passes(double threshold) const noexcept {
    return max_abs_error() <= threshold && max_angle() <= threshold;
}

ComparisonReport compare_modes(const DenseMatrix& u_serial, const DenseMatrix& u_parallel) {
    if (u_serial.rows() != u_parallel.rows() || u_serial.cols() != u_parallel.cols())
        throw InvalidArgument("compare_modes: shapes " + std::to_string(u_serial.rows()) + "x" +
                              std::to_string(u_serial.cols()) + " and " + std::to_string(u_parallel.rows()) + "x" +
                              std::to_string(u_parallel.cols()) + " differ");
    const Index m = u_serial.rows();
    DenseMatrix aligned = u_parallel;
    ComparisonReport report;
    for (Index j = 0; j < u_serial.cols(); ++j) {
        const auto a = u_serial.col(j);
        auto b = aligned.col(j);
        double ip = 0.0;
        for (Index i = 0; i < m; ++i) ip += a[i] * b[i];
        if (ip < 0.0)
            for (double& x : b) x = -x;
        ModeComparison c;
        c.mode = j + 1;
        double na = 0.0, nb = 0.0;
        for (Index i = 0; i < m; ++i) {
            c.max_abs_error = std::max(c.max_abs_error, std::abs(a[i] - b[i]));
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        if (na > 0.0 && nb > 0.0) {
            double chord = 0.0;
            for (Index i = 0; i < m; ++i) chord += (a[i] / na - b[i] / nb) * (a[i] / na - b[i] / nb);
            c.angle = 2.0 * std::asin(std::min(1.0, std::sqrt(chord) / 2.0));
        } else if (na != nb) {
            c.angle = std::acos(0.0);
        }
        report.modes.push_back(c);
    }
    if (m > 0 && u_serial.cols() > 0 && u_serial.cols() <= m) {
        // sin of the largest principal angle is ||(I - Qa Qa^T) Qb||_2, formed
        // from Qb - Qa so identical inputs give exactly zero
        const DenseMatrix qa = qr_factor(u_serial).q;
        const DenseMatrix qb = qr_factor(aligned).q;
        const DenseMatrix d = subtract(qb, qa);
        const DenseMatrix residual = subtract(d, matmul(qa, matmul_tn(qa, d)));
        const double sine = svd_full(residual, false).s.front();
        report.subspace_angle = std::asin(std::min(1.0, sine));
    }
    return report;
}

ComparisonReport emit_comparison(const fs::path& path, const DenseMatrix& u_serial, const DenseMatrix& u_parallel) {
    const ComparisonReport report = compare_modes(u_serial, u_parallel);
    auto out = open_out(path);
    out << "mode,max_abs_error,angle_rad\n";
    for (const auto& c : report.modes)
        out << c.mode << ',' << format_real(c.max_abs_error) << ',' << format_real(c.angle) << '\n';
    out << "subspace," << format_real(report.max_abs_error()) << ',' << format_real(report.subspace_angle) << '\n';
    finish(out, path);
    return report;
}

}  // namespace parsvd::io
