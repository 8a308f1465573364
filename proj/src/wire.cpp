#include "parsvd/wire.hpp"

#include <bit>
#include <limits>
#include <string>

#include "parsvd/error.hpp"

namespace parsvd::wire {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::byte* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

Bytes encode_matrix(const DenseMatrix& m) {
    Bytes out;
    out.reserve(kMatrixHeaderBytes + 8 * m.size());
    put_u64(out, m.rows());
    put_u64(out, m.cols());
    for (double v : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

std::size_t matrix_payload_bytes(std::span<const std::byte> header) {
    if (header.size() < kMatrixHeaderBytes) throw ProtocolError("wire: truncated matrix header");
    const std::uint64_t rows = get_u64(header.data());
    const std::uint64_t cols = get_u64(header.data() + 8);
    constexpr std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
    if (rows != 0 && cols > limit / rows)
        throw ProtocolError("wire: matrix shape " + std::to_string(rows) + "x" + std::to_string(cols) + " overflows");
    return static_cast<std::size_t>(8 * rows * cols);
}

DenseMatrix decode_matrix(std::span<const std::byte> bytes) {
    const std::size_t payload = matrix_payload_bytes(bytes);
    if (bytes.size() != kMatrixHeaderBytes + payload)
        throw ProtocolError("wire: frame carries " + std::to_string(bytes.size()) + " bytes, header implies " +
                            std::to_string(kMatrixHeaderBytes + payload));
    const Index rows = get_u64(bytes.data());
    const Index cols = get_u64(bytes.data() + 8);
    std::vector<double> data(rows * cols);
    const std::byte* p = bytes.data() + kMatrixHeaderBytes;
    for (auto& v : data) {
        v = std::bit_cast<double>(get_u64(p));
        p += 8;
    }
    try {
        return DenseMatrix(rows, cols, std::move(data));
    } catch (const InvalidArgument& e) {
        throw ProtocolError(std::string("wire: ") + e.what());
    }
}

Bytes encode_frame_header(const FrameHeader& h) {
    Bytes out;
    out.reserve(kFrameHeaderBytes);
    put_u32(out, h.tag);
    put_u32(out, h.source);
    put_u32(out, h.dest);
    return out;
}

FrameHeader decode_frame_header(std::span<const std::byte> bytes) {
    if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("wire: truncated frame header");
    return {get_u32(bytes.data()), get_u32(bytes.data() + 4), get_u32(bytes.data() + 8)};
}

}  // namespace parsvd::wire
