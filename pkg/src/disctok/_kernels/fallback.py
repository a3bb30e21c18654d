"""Pure-numpy implementations of the hot-loop kernels.

Semantics match the compiled extension: squared-Euclidean nearest
centroid with ties broken toward the smaller index, and LSB-first
little-endian fixed-width bit packing with zero high-bit padding.
"""

import numpy as np

# chunking bounds memory and fixes the f64 accumulation order, so results
# do not depend on worker count or input size
_ASSIGN_CHUNK = 8192
_PACK_CHUNK = 1 << 20  # tokens per chunk; multiple of 8 keeps chunks byte-aligned


def _chunk_distances(chunk: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Squared distances chunk x centroids, float64."""
    k, d = centroids.shape
    if k * d <= 4096:
        # direct differences: exact same arithmetic as the scalar oracle
        diff = chunk[:, None, :].astype(np.float64) - centroids[None, :, :]
        return np.einsum("ikd,ikd->ik", diff, diff)
    x = chunk.astype(np.float64)
    x2 = np.einsum("id,id->i", x, x)
    c2 = np.einsum("kd,kd->k", centroids, centroids)
    return x2[:, None] + c2[None, :] - 2.0 * (x @ centroids.T)


def assign_tokens(frames: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    n = frames.shape[0]
    out = np.empty(n, dtype=np.int32)
    for start in range(0, n, _ASSIGN_CHUNK):
        chunk = frames[start : start + _ASSIGN_CHUNK]
        d2 = _chunk_distances(chunk, centroids)
        out[start : start + _ASSIGN_CHUNK] = np.argmin(d2, axis=1)
    return out


def assign_accumulate(frames: np.ndarray, centroids: np.ndarray):
    k, d = centroids.shape
    labels = assign_tokens(frames, centroids)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    sums = np.zeros((k, d), dtype=np.float64)
    np.add.at(sums, labels, frames.astype(np.float64))
    diff = frames.astype(np.float64) - centroids[labels]
    inertia = float(np.einsum("id,id->", diff, diff))
    return labels, sums, counts, inertia


def pack_bits(tokens: np.ndarray, bit_width: int) -> bytes:
    shifts = np.arange(bit_width, dtype=np.uint64)
    parts = []
    for start in range(0, len(tokens), _PACK_CHUNK):
        chunk = tokens[start : start + _PACK_CHUNK]
        bits = ((chunk[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        parts.append(np.packbits(bits.ravel(), bitorder="little").tobytes())
    return b"".join(parts)


def unpack_bits(payload: bytes, bit_width: int, n: int):
    out = np.empty(n, dtype=np.uint64)
    weights = np.uint64(1) << np.arange(bit_width, dtype=np.uint64)
    raw = np.frombuffer(payload, dtype=np.uint8)
    bytes_per_chunk = _PACK_CHUNK * bit_width // 8
    clean = True
    for i, start in enumerate(range(0, n, _PACK_CHUNK)):
        m = min(_PACK_CHUNK, n - start)
        blob = raw[i * bytes_per_chunk : i * bytes_per_chunk + (m * bit_width + 7) // 8]
        bits = np.unpackbits(blob, bitorder="little")
        used = bits[: m * bit_width].astype(np.uint64).reshape(m, bit_width)
        out[start : start + m] = used @ weights
        if bits[m * bit_width :].any():
            clean = False
    return out, clean
