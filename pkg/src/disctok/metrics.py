"""Token-quality metrics: phoneme purity, discrete token purity, and
phone-normalized mutual information (PNMI), plus sequence-length statistics.

All metrics are computed from a (token x phone) joint frame-count table;
entropies use natural log with 0*log(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePhoneDistribution,
    EmptyTable,
    IdSetMismatch,
    LengthMismatch,
)
from .kmeans import TokenSequence


@dataclass(frozen=True)
class ContingencyTable:
    """Joint frame counts: rows are token ids, columns are phone ids."""

    counts: np.ndarray  # (num_tokens, num_phones) int64

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or (counts < 0).any():
            raise EmptyTable("counts must be a non-negative 2-D matrix")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def joint_counts(
    token_seqs: list[TokenSequence], phone_labels: dict[str, np.ndarray]
) -> ContingencyTable:
    """Accumulate (token, phone) frame counts over a corpus.

    Phone labels must align one-to-one with the raw (pre-dedup) tokens.
    """
    num_tokens = max((ts.vocab_size for ts in token_seqs), default=0)
    num_phones = 0
    for labels in phone_labels.values():
        if len(labels):
            num_phones = max(num_phones, int(np.max(labels)) + 1)
    counts = np.zeros((num_tokens, num_phones), dtype=np.int64)
    for ts in token_seqs:
        if ts.utterance_id not in phone_labels:
            raise IdSetMismatch(f"no phone labels for {ts.utterance_id}")
        phones = np.asarray(phone_labels[ts.utterance_id], dtype=np.int64)
        if phones.shape[0] != len(ts):
            raise LengthMismatch(
                f"{ts.utterance_id}: {len(ts)} tokens vs {phones.shape[0]} phone labels"
            )
        np.add.at(counts, (ts.tokens, phones), 1)
    return ContingencyTable(counts)


def _joint_probs(table: ContingencyTable) -> np.ndarray:
    total = table.total
    if total < 1:
        raise EmptyTable("contingency table has no counts")
    return table.counts / total


def phone_purity(table: ContingencyTable) -> float:
    """Sum over tokens of the largest joint probability with any phone."""
    p = _joint_probs(table)
    return float(p.max(axis=1).sum()) if p.size else 0.0


def token_purity(table: ContingencyTable) -> float:
    """Transposed purity: sum over phones of the largest joint probability."""
    p = _joint_probs(table)
    return float(p.max(axis=0).sum()) if p.size else 0.0


def pnmi(table: ContingencyTable) -> float:
    """I(token; phone) / H(phone), natural-log entropies."""
    p = _joint_probs(table)
    pt = p.sum(axis=1)
    py = p.sum(axis=0)
    h_phone = float(-np.sum(py[py > 0] * np.log(py[py > 0])))
    if h_phone == 0.0:
        raise DegeneratePhoneDistribution("single phone: H(phone) = 0")
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / np.outer(pt, py)[nz])))
    return mi / h_phone


@dataclass(frozen=True)
class LengthStats:
    """Mean sequence lengths before/after a length-reduction transform."""

    split_name: str
    num_utts: int
    before_mean: float
    mean_length: float

    @property
    def reduction_fraction(self) -> float:
        if self.before_mean <= 0:
            return 0.0
        return 1.0 - self.mean_length / self.before_mean


def length_stats(
    before: list[TokenSequence],
    after: list[TokenSequence],
    split_name: str = "all",
) -> LengthStats:
    """Mean-length comparison between two corpora over the same utterances."""
    ids_before = {ts.utterance_id for ts in before}
    ids_after = {ts.utterance_id for ts in after}
    if ids_before != ids_after:
        raise IdSetMismatch("before/after corpora cover different utterances")
    n = len(before)
    before_mean = sum(len(ts) for ts in before) / n if n else 0.0
    after_mean = sum(len(ts) for ts in after) / n if n else 0.0
    return LengthStats(split_name, n, before_mean, after_mean)


def format_report(
    table: ContingencyTable, extra: dict | None = None
) -> tuple[str, dict]:
    """Human-readable metric table plus machine-readable key/values."""
    values = {
        "phn_pur": phone_purity(table),
        "dsc_pur": token_purity(table),
        "pnmi": pnmi(table),
        "frames": table.total,
    }
    if extra:
        values.update(extra)
    lines = [
        f"{'metric':<12} value",
        f"{'phn_pur':<12} {values['phn_pur']:.4f}",
        f"{'dsc_pur':<12} {values['dsc_pur']:.4f}",
        f"{'PNMI':<12} {values['pnmi']:.4f}",
        f"{'frames':<12} {values['frames']}",
    ]
    return "\n".join(lines), values
