"""K-means codebook fitting and frame quantization.

Lloyd iterations run over fixed-size frame chunks; chunk partial sums are
combined in chunk order, so the fitted codebook is bit-identical for any
worker count. Centroids are kept in float64 during fitting and stored as
float32 (the on-disk codebook precision).
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (
    BadMagic,
    DimMismatch,
    EmptyCorpus,
    HeaderMismatch,
    InvalidConfig,
    IoFailure,
    NonFiniteValue,
    TooFewDistinctPoints,
)
from .features import CorpusManifest, FeatureSequence, read_features

CODEBOOK_MAGIC = b"DSCB"
CODEBOOK_VERSION = 1
DEFAULT_CHUNK_FRAMES = 8192


@dataclass(frozen=True)
class Codebook:
    """A fitted quantizer: k centroid vectors plus fit metadata."""

    centroids: np.ndarray  # (k, dim) float32
    seed: int
    iterations_run: int
    final_inertia: float

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class TokenSequence:
    """Discrete token ids for one utterance, optionally run-length deduped."""

    utterance_id: str
    tokens: np.ndarray  # (n,) int64
    vocab_size: int
    frame_rate_hz: float
    run_lengths: np.ndarray | None = None  # (n,) int64, present after dedup

    def __post_init__(self):
        tokens = np.ascontiguousarray(self.tokens, dtype=np.int64)
        object.__setattr__(self, "tokens", tokens)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.vocab_size):
            raise InvalidConfig(
                f"{self.utterance_id}: token id outside [0, {self.vocab_size})"
            )
        if self.run_lengths is not None:
            runs = np.ascontiguousarray(self.run_lengths, dtype=np.int64)
            object.__setattr__(self, "run_lengths", runs)
            if runs.shape != tokens.shape:
                raise InvalidConfig("run_lengths must match tokens in length")

    def __len__(self) -> int:
        return self.tokens.shape[0]


def subsample_frames(
    manifest: CorpusManifest, target_frames: int, seed: int
) -> np.ndarray:
    """Uniform without-replacement sample of frames across the whole corpus."""
    if target_frames < 1:
        raise InvalidConfig("target_frames must be >= 1")
    total = manifest.total_frames
    if total == 0:
        raise EmptyCorpus("corpus has no frames")
    rng = np.random.default_rng(seed)
    if target_frames >= total:
        picked = np.arange(total)
    else:
        picked = np.sort(rng.choice(total, size=target_frames, replace=False))
    out = None
    pos = 0
    cursor = 0  # frames consumed so far over the corpus
    for utt, path, n in manifest.entries:
        lo = np.searchsorted(picked, cursor)
        hi = np.searchsorted(picked, cursor + n)
        if hi > lo:
            seq = read_features(path)
            if out is None:
                out = np.empty((len(picked), seq.dim), dtype=np.float32)
            out[lo:hi] = seq.frames[picked[lo:hi] - cursor]
            pos = hi
        cursor += n
    assert out is not None and pos == len(picked)
    return out


def kmeans_pp_init(data: np.ndarray, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding; returns (k, dim) float64 centroids."""
    data = np.ascontiguousarray(data, dtype=np.float32)
    n = data.shape[0]
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    if n < k:
        raise TooFewDistinctPoints(f"{n} rows < k={k}")
    rng = np.random.default_rng(seed)
    data64 = data.astype(np.float64)
    centroids = np.empty((k, data.shape[1]), dtype=np.float64)
    centroids[0] = data64[rng.integers(n)]
    d2 = ((data64 - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            raise TooFewDistinctPoints(f"fewer than k={k} distinct rows")
        idx = rng.choice(n, p=d2 / total)
        centroids[i] = data64[idx]
        d2 = np.minimum(d2, ((data64 - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _accumulate(
    data: np.ndarray,
    centroids: np.ndarray,
    chunk_frames: int,
    workers: int,
):
    """Chunked Lloyd pass; partials combined in fixed chunk order."""
    n, d = data.shape
    k = centroids.shape[0]
    starts = range(0, n, chunk_frames)

    def one(start):
        return _kernels.assign_accumulate(
            data[start : start + chunk_frames], centroids
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, starts))
    else:
        parts = [one(s) for s in starts]

    labels = np.empty(n, dtype=np.int32)
    sums = np.zeros((k, d), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    inertia = 0.0
    for start, (lab, s, c, ine) in zip(starts, parts):
        labels[start : start + chunk_frames] = lab
        sums += s
        counts += c
        inertia += ine
    return labels, sums, counts, inertia


def lloyd_fit(
    data: np.ndarray,
    k: int,
    max_iters: int = 100,
    rel_tol: float = 1e-6,
    seed: int = 0,
    chunk_frames: int = DEFAULT_CHUNK_FRAMES,
    workers: int = 1,
) -> tuple[Codebook, list[float]]:
    """Fit a codebook with Lloyd's algorithm from a k-means++ start.

    Returns (codebook, per-iteration inertia history). Empty clusters are
    re-seeded with the point farthest from its assigned centroid.
    """
    data = np.ascontiguousarray(data, dtype=np.float32)
    if not np.isfinite(data).all():
        raise NonFiniteValue("non-finite value in training data")
    if max_iters < 1 or rel_tol < 0:
        raise InvalidConfig("max_iters must be >= 1 and rel_tol >= 0")
    centroids = kmeans_pp_init(data, k, seed)

    history: list[float] = []
    prev_labels = None
    iterations = 0
    for _ in range(max_iters):
        labels, sums, counts, inertia = _accumulate(
            data, centroids, chunk_frames, workers
        )
        history.append(inertia)
        iterations += 1
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        new = centroids.copy()
        nonempty = counts > 0
        new[nonempty] = sums[nonempty] / counts[nonempty, None]
        empties = np.flatnonzero(~nonempty)
        if empties.size:
            diff = data.astype(np.float64) - centroids[labels]
            point_d2 = np.einsum("id,id->i", diff, diff)
            order = np.argsort(-point_d2, kind="stable")
            for c, idx in zip(empties, order):
                new[c] = data[idx].astype(np.float64)
        centroids = new
        prev_labels = labels
        if len(history) >= 2:
            prev, cur = history[-2], history[-1]
            if prev > 0 and (prev - cur) < rel_tol * prev:
                break
    codebook = Codebook(
        centroids=centroids.astype(np.float32),
        seed=seed,
        iterations_run=iterations,
        final_inertia=history[-1],
    )
    return codebook, history


def assign(codebook: Codebook, features: FeatureSequence) -> TokenSequence:
    """Quantize every frame to its nearest centroid."""
    if features.dim != codebook.dim:
        raise DimMismatch(
            f"feature dim {features.dim} != codebook dim {codebook.dim}"
        )
    labels = _kernels.assign_tokens(
        features.frames, codebook.centroids.astype(np.float64)
    )
    return TokenSequence(
        utterance_id=features.utterance_id,
        tokens=labels.astype(np.int64),
        vocab_size=codebook.k,
        frame_rate_hz=features.frame_rate_hz,
    )


def save_codebook(codebook: Codebook, path: str | os.PathLike) -> None:
    hdr = CODEBOOK_MAGIC + struct.pack(
        "<IIIQd",
        CODEBOOK_VERSION,
        codebook.k,
        codebook.dim,
        codebook.seed,
        codebook.final_inertia,
    )
    body = hdr + codebook.centroids.astype("<f4", copy=False).tobytes()
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    try:
        tmp.write_bytes(body)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_codebook(path: str | os.PathLike) -> Codebook:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    hdr_size = 4 + struct.calcsize("<IIIQd")
    if len(blob) < hdr_size or blob[:4] != CODEBOOK_MAGIC:
        raise BadMagic(f"{path}: not a DSCB codebook file")
    version, k, dim, seed, inertia = struct.unpack("<IIIQd", blob[4:hdr_size])
    if version != CODEBOOK_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    payload = blob[hdr_size:]
    if len(payload) != k * dim * 4:
        raise HeaderMismatch(
            f"{path}: payload {len(payload)} bytes, header implies {k * dim * 4}"
        )
    centroids = np.frombuffer(payload, dtype="<f4").reshape(k, dim).copy()
    return Codebook(
        centroids=centroids, seed=seed, iterations_run=0, final_inertia=inertia
    )
