"""Parity between the compiled kernels and the numpy fallback."""

import numpy as np
import pytest

from disctok._kernels import BACKEND, fallback

if BACKEND == "compiled":
    from disctok._kernels import _core
else:
    _core = None

needs_compiled = pytest.mark.skipif(
    _core is None, reason="compiled extension not available"
)

rng = np.random.default_rng(1234)


@needs_compiled
@pytest.mark.parametrize("n,d,k", [(0, 3, 4), (1, 1, 1), (257, 5, 7), (5000, 4, 16)])
def test_assign_parity(n, d, k):
    frames = rng.standard_normal((n, d)).astype(np.float32)
    centroids = rng.standard_normal((k, d)).astype(np.float64)
    got = _core.assign_tokens(frames, centroids)
    want = fallback.assign_tokens(frames, centroids)
    np.testing.assert_array_equal(got, want)


@needs_compiled
def test_accumulate_parity():
    frames = rng.standard_normal((3000, 6)).astype(np.float32)
    centroids = rng.standard_normal((9, 6)).astype(np.float64)
    lab_c, sums_c, counts_c, in_c = _core.assign_accumulate(frames, centroids)
    lab_f, sums_f, counts_f, in_f = fallback.assign_accumulate(frames, centroids)
    np.testing.assert_array_equal(lab_c, lab_f)
    np.testing.assert_array_equal(counts_c, counts_f)
    np.testing.assert_allclose(sums_c, sums_f, rtol=1e-12)
    assert in_c == pytest.approx(in_f, rel=1e-12)


@needs_compiled
@pytest.mark.parametrize("width", [1, 4, 7, 8, 11, 12, 20])
@pytest.mark.parametrize("n", [0, 1, 7, 8, 1000])
def test_pack_parity(width, n):
    tokens = rng.integers(0, 1 << width, size=n).astype(np.uint64)
    blob_c = _core.pack_bits(tokens, width)
    blob_f = fallback.pack_bits(tokens, width)
    assert blob_c == blob_f
    out_c, clean_c = _core.unpack_bits(blob_c, width, n)
    out_f, clean_f = fallback.unpack_bits(blob_f, width, n)
    assert clean_c and clean_f
    np.testing.assert_array_equal(out_c, tokens)
    np.testing.assert_array_equal(out_f, tokens)


def test_fallback_tie_break_smallest_index():
    frames = np.array([[1.0]], np.float32)
    centroids = np.array([[0.0], [2.0]], np.float64)
    assert fallback.assign_tokens(frames, centroids)[0] == 0


@needs_compiled
def test_compiled_tie_break_smallest_index():
    frames = np.array([[1.0]], np.float32)
    centroids = np.array([[0.0], [2.0]], np.float64)
    assert _core.assign_tokens(frames, centroids)[0] == 0
