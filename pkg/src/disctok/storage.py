"""Bit-packed token file format ("DSTK") and data-size accounting.

Token ids are written LSB-first into a little-endian bitstream at a fixed
width of ceil(log2(vocab_size)) bits (minimum 1); the final partial byte is
zero-padded in its high bits and that padding is validated on read. An
optional varint run-length section keeps de-duplication invertible on disk.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import BadMagic, CorruptPayload, InvalidConfig, IoFailure
from .kmeans import TokenSequence

TOKEN_MAGIC = b"DSTK"
TOKEN_VERSION = 1
_FIXED_HEADER = "<IIBBfQQ"  # version, vocab, width, flags, rate, ntok, rl_bytes

FLAG_DEDUPED = 1
FLAG_SUBWORDED = 2
FLAG_MASKED = 4


def bit_width_for(vocab_size: int) -> int:
    """ceil(log2(vocab_size)), minimum 1."""
    if vocab_size < 1:
        raise InvalidConfig("vocab_size must be >= 1")
    return max(1, (vocab_size - 1).bit_length())


@dataclass(frozen=True)
class PackedTokenFile:
    """In-memory image of one DSTK file."""

    vocab_size: int
    bit_width: int
    frame_rate_hz: float
    deduped: bool
    subworded: bool
    masked: bool
    num_tokens: int
    payload: bytes
    run_lengths: np.ndarray | None = None


def _encode_varints(values: np.ndarray) -> bytes:
    out = bytearray()
    for v in values.tolist():
        v = int(v)
        while True:
            b = v & 0x7F
            v >>= 7
            if v:
                out.append(b | 0x80)
            else:
                out.append(b)
                break
    return bytes(out)


def _decode_varints(blob: bytes, count: int) -> np.ndarray:
    out = np.empty(count, dtype=np.int64)
    pos = 0
    for i in range(count):
        val = 0
        shift = 0
        while True:
            if pos >= len(blob):
                raise CorruptPayload("truncated run-length section")
            b = blob[pos]
            pos += 1
            val |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
        out[i] = val
    if pos != len(blob):
        raise CorruptPayload("trailing bytes in run-length section")
    return out


def pack(
    ts: TokenSequence,
    subworded: bool = False,
    masked: bool = False,
    deduped: bool | None = None,
) -> PackedTokenFile:
    """Pack a token sequence into the DSTK wire image.

    `deduped` defaults to whether run lengths are present; pass it
    explicitly when packing a subworded stream derived from deduped tokens
    (the run-length section only exists for plain deduped streams).
    """
    width = bit_width_for(ts.vocab_size)
    payload = _kernels.pack_bits(
        np.ascontiguousarray(ts.tokens, dtype=np.uint64), width
    )
    return PackedTokenFile(
        vocab_size=ts.vocab_size,
        bit_width=width,
        frame_rate_hz=ts.frame_rate_hz,
        deduped=ts.run_lengths is not None if deduped is None else deduped,
        subworded=subworded,
        masked=masked,
        num_tokens=len(ts),
        payload=payload,
        run_lengths=None if ts.run_lengths is None else ts.run_lengths.copy(),
    )


def unpack(ptf: PackedTokenFile, utterance_id: str = "") -> TokenSequence:
    """Exact inverse of pack; rejects out-of-range ids and dirty padding."""
    expected = (ptf.num_tokens * ptf.bit_width + 7) // 8
    if len(ptf.payload) != expected:
        raise CorruptPayload(
            f"payload {len(ptf.payload)} bytes, expected {expected}"
        )
    tokens, clean = _kernels.unpack_bits(
        ptf.payload, ptf.bit_width, ptf.num_tokens
    )
    if not clean:
        raise CorruptPayload("nonzero padding bits in final byte")
    if tokens.size and int(tokens.max()) >= ptf.vocab_size:
        raise CorruptPayload("decoded token id out of vocabulary range")
    return TokenSequence(
        utterance_id,
        tokens.astype(np.int64),
        ptf.vocab_size,
        ptf.frame_rate_hz,
        run_lengths=None if ptf.run_lengths is None else ptf.run_lengths.copy(),
    )


def write_token_file(ptf: PackedTokenFile, path: str | os.PathLike) -> None:
    flags = (
        (FLAG_DEDUPED if ptf.deduped else 0)
        | (FLAG_SUBWORDED if ptf.subworded else 0)
        | (FLAG_MASKED if ptf.masked else 0)
    )
    rl_blob = b""
    if ptf.run_lengths is not None:
        rl_blob = _encode_varints(ptf.run_lengths)
    hdr = TOKEN_MAGIC + struct.pack(
        _FIXED_HEADER,
        TOKEN_VERSION,
        ptf.vocab_size,
        ptf.bit_width,
        flags,
        ptf.frame_rate_hz,
        ptf.num_tokens,
        len(rl_blob),
    )
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    try:
        tmp.write_bytes(hdr + rl_blob + ptf.payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_token_file(path: str | os.PathLike) -> PackedTokenFile:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    hdr_size = 4 + struct.calcsize(_FIXED_HEADER)
    if len(blob) < hdr_size or blob[:4] != TOKEN_MAGIC:
        raise BadMagic(f"{path}: not a DSTK token file")
    version, vocab, width, flags, rate, ntok, rl_bytes = struct.unpack(
        _FIXED_HEADER, blob[4:hdr_size]
    )
    if version != TOKEN_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if width != bit_width_for(vocab):
        raise CorruptPayload(f"{path}: bit width {width} inconsistent with vocab {vocab}")
    rl_blob = blob[hdr_size : hdr_size + rl_bytes]
    if len(rl_blob) != rl_bytes:
        raise CorruptPayload(f"{path}: truncated run-length section")
    run_lengths = None
    if flags & FLAG_DEDUPED and not flags & FLAG_SUBWORDED:
        run_lengths = _decode_varints(rl_blob, ntok)
    payload = blob[hdr_size + rl_bytes :]
    expected = (ntok * width + 7) // 8
    if len(payload) != expected:
        raise CorruptPayload(
            f"{path}: payload {len(payload)} bytes, expected {expected}"
        )
    return PackedTokenFile(
        vocab_size=vocab,
        bit_width=width,
        frame_rate_hz=rate,
        deduped=bool(flags & FLAG_DEDUPED),
        subworded=bool(flags & FLAG_SUBWORDED),
        masked=bool(flags & FLAG_MASKED),
        num_tokens=ntok,
        payload=payload,
        run_lengths=run_lengths,
    )


# --------------------------------------------------------------------------
# data-size accounting


class FormatKind(Enum):
    RAW_WAVEFORM = "raw_waveform"
    ACOUSTIC_FEATURES = "acoustic_features"
    SSL_FEATURES = "ssl_features"
    DISCRETE_TOKENS = "discrete_tokens"


@dataclass(frozen=True)
class SizeModel:
    """Per-format bit-rate parameters for a T-second utterance."""

    kind: FormatKind
    sample_rate: int = 16000
    sample_bits: int = 16
    dim: int = 80
    frame_rate: int = 100
    float_bits: int = 32
    ssl_dim: int = 1024
    ssl_frame_rate: int = 50
    token_bits: int = 12
    token_rate: int = 50

    def __post_init__(self):
        for name in (
            "sample_rate",
            "sample_bits",
            "dim",
            "frame_rate",
            "float_bits",
            "ssl_dim",
            "ssl_frame_rate",
            "token_bits",
            "token_rate",
        ):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be positive")


def size_bits(model: SizeModel, duration_s: float) -> float:
    """Bits needed to store a duration_s-second utterance in the format."""
    if duration_s < 0:
        raise InvalidConfig("duration must be >= 0")
    if model.kind is FormatKind.RAW_WAVEFORM:
        return model.sample_bits * model.sample_rate * duration_s
    if model.kind is FormatKind.ACOUSTIC_FEATURES:
        return model.float_bits * model.dim * model.frame_rate * duration_s
    if model.kind is FormatKind.SSL_FEATURES:
        return model.float_bits * model.ssl_dim * model.ssl_frame_rate * duration_s
    return model.token_bits * model.token_rate * duration_s


def measure_corpus(
    token_dir: str | os.PathLike, duration_s: float | None = None
) -> dict:
    """Sum on-disk token-file sizes and report ratios vs. the raw-waveform
    and SSL-feature baselines.

    If duration_s is not given it is derived from undeduped token files
    (num_tokens / frame_rate); deduped files contribute no duration.
    """
    token_dir = Path(token_dir)
    if not token_dir.exists():
        raise IoFailure(f"{token_dir} does not exist")
    total_bytes = 0
    payload_bytes = 0
    total_tokens = 0
    derived_duration = 0.0
    num_files = 0
    for path in sorted(token_dir.glob("*.dstk")):
        ptf = read_token_file(path)
        num_files += 1
        total_bytes += path.stat().st_size
        payload_bytes += len(ptf.payload)
        total_tokens += ptf.num_tokens
        if not ptf.deduped and not ptf.subworded and ptf.frame_rate_hz > 0:
            derived_duration += ptf.num_tokens / ptf.frame_rate_hz
    duration = duration_s if duration_s is not None else derived_duration
    report = {
        "num_files": num_files,
        "total_bytes": total_bytes,
        "payload_bytes": payload_bytes,
        "total_tokens": total_tokens,
        "duration_s": duration,
    }
    if duration > 0 and total_bytes > 0:
        raw = size_bits(SizeModel(FormatKind.RAW_WAVEFORM), duration) / 8
        ssl = size_bits(SizeModel(FormatKind.SSL_FEATURES), duration) / 8
        report["ratio_vs_raw"] = raw / total_bytes
        report["ratio_vs_ssl"] = ssl / total_bytes
    return report
