"""Streaming, distributed and randomized SVD."""

from ._core import (
    Error,
    FormatError,
    InvalidArgument,
    IoError,
    burgers_matrix,
    compare_modes,
    low_rank_svd,
    parallel_svd,
    qr,
    read_matrix,
    stream_svd,
    svd,
    synthetic_spectrum_matrix,
    write_matrix,
)

__all__ = [
    "Error",
    "FormatError",
    "InvalidArgument",
    "IoError",
    "burgers_matrix",
    "compare_modes",
    "low_rank_svd",
    "parallel_svd",
    "qr",
    "read_matrix",
    "stream_svd",
    "svd",
    "synthetic_spectrum_matrix",
    "write_matrix",
]
