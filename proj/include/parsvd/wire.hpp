#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "parsvd/matrix.hpp"

namespace parsvd::wire {

using Bytes = std::vector<std::byte>;

// WireMatrix: u64 rows | u64 cols | rows*cols f64, all little-endian, column-major.
inline constexpr std::size_t kMatrixHeaderBytes = 16;
// Frame: u32 tag | u32 source | u32 dest | WireMatrix.
inline constexpr std::size_t kFrameHeaderBytes = 12;

struct FrameHeader {
    std::uint32_t tag = 0;
    std::uint32_t source = 0;
    std::uint32_t dest = 0;
};

Bytes encode_matrix(const DenseMatrix& m);
// Throws ProtocolError when the byte count disagrees with the header.
DenseMatrix decode_matrix(std::span<const std::byte> bytes);

Bytes encode_frame_header(const FrameHeader& h);
FrameHeader decode_frame_header(std::span<const std::byte> bytes);

// Reads the little-endian u64 pair at the start of a WireMatrix; returns the
// payload byte count that must follow. Throws ProtocolError on overflow.
std::size_t matrix_payload_bytes(std::span<const std::byte> header);

void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
std::uint32_t get_u32(const std::byte* p);
std::uint64_t get_u64(const std::byte* p);

}  // namespace parsvd::wire
