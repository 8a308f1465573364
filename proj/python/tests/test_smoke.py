import numpy as np
import pytest

import parsvd


def aligned(a, b):
    signs = np.sign(np.sum(a * b, axis=0))
    signs[signs == 0] = 1.0
    return np.max(np.abs(a - b * signs))


def test_qr_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((12, 5))
    q, r = parsvd.qr(a)
    assert q.shape == (12, 5) and r.shape == (5, 5)
    assert np.allclose(q @ r, a, atol=1e-12)
    assert np.allclose(q.T @ q, np.eye(5), atol=1e-12)
    assert np.all(np.diag(r) >= 0)
    assert np.allclose(np.tril(r, -1), 0.0)


def test_svd_matches_numpy():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((20, 7))
    u, s, vt = parsvd.svd(a)
    ref_u, ref_s, _ = np.linalg.svd(a, full_matrices=False)
    assert np.allclose(s, ref_s, rtol=1e-12)
    assert aligned(ref_u, u) < 1e-10
    assert np.allclose((u * s) @ vt, a, atol=1e-12)
    assert parsvd.svd(a, want_vt=False)[2] is None


def test_low_rank_svd_on_known_spectrum():
    sigma = 2.0 ** -np.arange(1, 51)
    a = parsvd.synthetic_spectrum_matrix(200, 50, sigma, seed=3)
    assert np.allclose(np.linalg.svd(a, compute_uv=False), sigma, rtol=1e-9, atol=1e-15)
    u, s, vt = parsvd.low_rank_svd(a, rank=10, seed=5)
    assert u.shape == (200, 10) and vt.shape == (10, 50)
    assert np.allclose(s[:5], sigma[:5], rtol=1e-2)


def test_burgers_and_stream_and_parallel_agree():
    a = parsvd.burgers_matrix(grid_points=256, snapshots=200)
    assert a.shape == (256, 200)
    ref_u, ref_s, _ = np.linalg.svd(a, full_matrices=False)

    modes, s = parsvd.parallel_svd(a, world_size=4, k=2, r1=50, r2=5)
    assert modes.shape == (256, 2)
    assert aligned(ref_u[:, :2], modes) < 1e-8
    assert np.allclose(s[:2], ref_s[:2], rtol=1e-10)
    report = parsvd.compare_modes(ref_u[:, :2], modes)
    assert report["subspace_angle"] < 1e-8

    modes, s, history = parsvd.stream_svd(a, k=5, ff=1.0, batch=50)
    assert len(history) == 4
    assert modes.shape == (256, 5)
    # truncating to K per batch leaves a small bias on slowly decaying spectra
    assert aligned(ref_u[:, :1], modes[:, :1]) < 1e-3

    modes, s = parsvd.parallel_svd(a, world_size=2, k=3, r1=20, r2=5, ff=0.9, batch=50)
    assert modes.shape == (256, 3)


def test_matrix_file_round_trip(tmp_path):
    a = np.arange(12.0).reshape(3, 4)
    path = tmp_path / "a.mat"
    parsvd.write_matrix(path, a)
    assert path.read_bytes()[:8] == b"PARSVD01"
    assert np.array_equal(parsvd.read_matrix(path), a)
    with pytest.raises(OSError):
        parsvd.read_matrix(tmp_path / "missing.mat")


def test_invalid_arguments_raise_value_error():
    with pytest.raises(ValueError):
        parsvd.stream_svd(np.ones((4, 4)), k=2, ff=1.5, batch=2)
    with pytest.raises(ValueError):
        parsvd.qr(np.ones(3))
