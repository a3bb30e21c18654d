"""Binary feature-matrix format, corpus manifests, and the synthetic
corpus generator used to exercise the pipeline without real speech data.

Feature file layout (little-endian): magic "DSFT", version u32=1,
num_frames u64, dim u32, frame_rate_hz f32, then num_frames x dim
float32 values in row-major order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    EmptyCorpus,
    HeaderMismatch,
    InvalidConfig,
    IoFailure,
    NonFiniteValue,
)

MAGIC = b"DSFT"
VERSION = 1
_HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u4"),
        ("num_frames", "<u8"),
        ("dim", "<u4"),
        ("frame_rate_hz", "<f4"),
    ]
)


@dataclass(frozen=True)
class FeatureSequence:
    """One utterance worth of frame-level feature vectors."""

    utterance_id: str
    frames: np.ndarray  # (num_frames, dim) float32
    frame_rate_hz: float

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if frames.ndim != 2:
            raise InvalidConfig("frames must be a 2-D matrix")
        if not np.isfinite(frames).all():
            raise NonFiniteValue(f"{self.utterance_id}: non-finite feature value")
        if self.frame_rate_hz <= 0:
            raise InvalidConfig("frame_rate_hz must be positive")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class CorpusManifest:
    """Index of feature files: (utterance_id, path, num_frames) rows."""

    entries: list[tuple[str, Path, int]] = field(default_factory=list)

    def __post_init__(self):
        ids = [utt for utt, _, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("duplicate utterance ids in manifest")

    @property
    def total_frames(self) -> int:
        return sum(n for _, _, n in self.entries)

    def save(self, path: str | os.PathLike) -> None:
        lines = [f"{utt}\t{p}\t{n}\n" for utt, p, n in self.entries]
        _atomic_write_text(Path(path), "".join(lines))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "CorpusManifest":
        entries = []
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read manifest: {exc}") from exc
        for line in text.splitlines():
            if not line.strip():
                continue
            utt, p, n = line.split("\t")
            entries.append((utt, Path(p), int(n)))
        return cls(entries)


def read_features(path: str | os.PathLike) -> FeatureSequence:
    """Read one feature file, validating magic, shape and finiteness."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(blob) < _HEADER.itemsize or blob[:4] != MAGIC:
        raise BadMagic(f"{path}: not a DSFT feature file")
    hdr = np.frombuffer(blob, dtype=_HEADER, count=1)[0]
    if hdr["version"] != VERSION:
        raise BadMagic(f"{path}: unsupported version {hdr['version']}")
    n, d = int(hdr["num_frames"]), int(hdr["dim"])
    payload = blob[_HEADER.itemsize :]
    if len(payload) != n * d * 4:
        raise HeaderMismatch(
            f"{path}: payload {len(payload)} bytes, header implies {n * d * 4}"
        )
    frames = np.frombuffer(payload, dtype="<f4").reshape(n, d)
    if not np.isfinite(frames).all():
        raise NonFiniteValue(f"{path}: non-finite value in payload")
    return FeatureSequence(path.stem, frames.copy(), float(hdr["frame_rate_hz"]))


def write_features(seq: FeatureSequence, path: str | os.PathLike) -> None:
    """Write a feature file; read_features round-trips it bit-exactly."""
    hdr = np.zeros(1, dtype=_HEADER)
    hdr["magic"] = MAGIC
    hdr["version"] = VERSION
    hdr["num_frames"] = seq.num_frames
    hdr["dim"] = seq.dim
    hdr["frame_rate_hz"] = seq.frame_rate_hz
    body = hdr.tobytes() + seq.frames.astype("<f4", copy=False).tobytes()
    _atomic_write_bytes(Path(path), body)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def synth_corpus(
    out_dir: str | os.PathLike,
    num_utts: int,
    frames_per_utt: int,
    dim: int,
    num_clusters: int,
    separation: float,
    seed: int,
    persistence: float = 0.7,
    frame_rate_hz: float = 50.0,
    num_phones: int | None = None,
) -> tuple[CorpusManifest, dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Generate a Gaussian-cluster corpus with known per-frame labels.

    Cluster means are rescaled so their minimum pairwise distance is
    `separation` times the unit within-cluster std. Consecutive frames
    repeat the previous cluster with probability `persistence`, otherwise
    a different cluster is drawn uniformly. Phone labels are
    `cluster % num_phones` (surjective; bijective by default).

    Returns (manifest, true token labels per utt, phone labels per utt).
    """
    if num_utts < 1 or frames_per_utt < 1 or dim < 1 or num_clusters < 1:
        raise InvalidConfig("all counts must be positive")
    if separation <= 0:
        raise InvalidConfig("separation must be positive")
    if not 0.0 <= persistence < 1.0:
        raise InvalidConfig("persistence must be in [0, 1)")
    if num_phones is None:
        num_phones = num_clusters
    if not 1 <= num_phones <= num_clusters:
        raise InvalidConfig("num_phones must be in [1, num_clusters]")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    means = rng.standard_normal((num_clusters, dim))
    if num_clusters > 1:
        d2 = ((means[:, None, :] - means[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        means *= separation / np.sqrt(d2.min())

    entries = []
    tokens: dict[str, np.ndarray] = {}
    phones: dict[str, np.ndarray] = {}
    width = len(str(num_utts - 1))
    for u in range(num_utts):
        utt = f"utt{u:0{width}d}"
        states = np.empty(frames_per_utt, dtype=np.int64)
        states[0] = rng.integers(num_clusters)
        for t in range(1, frames_per_utt):
            if num_clusters > 1 and rng.random() >= persistence:
                step = rng.integers(1, num_clusters)
                states[t] = (states[t - 1] + step) % num_clusters
            else:
                states[t] = states[t - 1]
        frames = (means[states] + rng.standard_normal((frames_per_utt, dim))).astype(
            np.float32
        )
        seq = FeatureSequence(utt, frames, frame_rate_hz)
        path = out_dir / f"{utt}.dsft"
        write_features(seq, path)
        entries.append((utt, path, frames_per_utt))
        tokens[utt] = states
        phones[utt] = states % num_phones
    return CorpusManifest(entries), tokens, phones


def iter_corpus(manifest: CorpusManifest):
    """Yield FeatureSequences for every manifest entry, validating frame counts."""
    if not manifest.entries:
        raise EmptyCorpus("manifest has no entries")
    for utt, path, n in manifest.entries:
        seq = read_features(path)
        if seq.num_frames != n:
            raise HeaderMismatch(
                f"{utt}: manifest says {n} frames, file has {seq.num_frames}"
            )
        yield FeatureSequence(utt, seq.frames, seq.frame_rate_hz)
