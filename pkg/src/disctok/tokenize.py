"""Length reduction for discrete token streams: run-length de-duplication,
unigram subword ("meta-token") modeling, and token-level time masking.

The unigram model assigns each sequence the likelihood
sum over segmentations of the product of piece probabilities; it is
trained by EM over the segmentation lattice and applied by Viterbi.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlreadyDeduped,
    BadMagic,
    EmptyCorpus,
    FingerprintMismatch,
    InvalidConfig,
    IoFailure,
    MissingRunLengths,
    TargetBelowBaseVocab,
    VocabMismatch,
)
from .kmeans import TokenSequence

MODEL_HEADER_PREFIX = "#disctok-unigram v1 base_vocab="

# zero expected counts are floored so every piece keeps a finite log-prob
# and single-token coverage stays usable
_COUNT_FLOOR = 1e-12


# --------------------------------------------------------------------------
# de-duplication


def dedup(ts: TokenSequence) -> TokenSequence:
    """Collapse maximal runs of equal tokens, recording run lengths."""
    if ts.run_lengths is not None:
        raise AlreadyDeduped(f"{ts.utterance_id} already has run lengths")
    tokens = ts.tokens
    if tokens.size == 0:
        return TokenSequence(
            ts.utterance_id,
            tokens,
            ts.vocab_size,
            ts.frame_rate_hz,
            run_lengths=np.empty(0, dtype=np.int64),
        )
    boundaries = np.flatnonzero(np.diff(tokens) != 0) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [tokens.size]))
    return TokenSequence(
        ts.utterance_id,
        tokens[starts],
        ts.vocab_size,
        ts.frame_rate_hz,
        run_lengths=ends - starts,
    )


def expand(ts: TokenSequence) -> TokenSequence:
    """Inverse of dedup: repeat each token by its run length."""
    if ts.run_lengths is None:
        raise MissingRunLengths(f"{ts.utterance_id} has no run lengths")
    if ts.run_lengths.size and ts.run_lengths.min() < 1:
        raise MissingRunLengths("run lengths must all be >= 1")
    return TokenSequence(
        ts.utterance_id,
        np.repeat(ts.tokens, ts.run_lengths),
        ts.vocab_size,
        ts.frame_rate_hz,
    )


# --------------------------------------------------------------------------
# unigram subword model


@dataclass
class SubwordModel:
    """Inventory of pieces (base-token-id tuples) with log probabilities."""

    pieces: list[tuple[int, ...]]
    log_probs: list[float]
    base_vocab_size: int
    target_vocab_size: int
    _index: dict[tuple[int, ...], int] = field(repr=False, default_factory=dict)
    _max_piece_len: int = field(repr=False, default=1)

    def __post_init__(self):
        if len(self.pieces) != len(set(self.pieces)):
            raise InvalidConfig("duplicate pieces in model")
        singles = {p[0] for p in self.pieces if len(p) == 1}
        if singles != set(range(self.base_vocab_size)):
            raise InvalidConfig("model must cover every single base token")
        self._index = {p: i for i, p in enumerate(self.pieces)}
        self._max_piece_len = max(len(p) for p in self.pieces)

    @property
    def vocab_size(self) -> int:
        return len(self.pieces)

    def piece_id(self, piece: tuple[int, ...]) -> int | None:
        return self._index.get(piece)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def to_text(self) -> str:
        lines = [f"{MODEL_HEADER_PREFIX}{self.base_vocab_size}\n"]
        for piece, lp in zip(self.pieces, self.log_probs):
            lines.append(f"{' '.join(map(str, piece))}\t{lp!r}\n")
        return "".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "SubwordModel":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(MODEL_HEADER_PREFIX):
            raise BadMagic("not a disctok-unigram model file")
        base = int(lines[0][len(MODEL_HEADER_PREFIX) :])
        pieces, lps = [], []
        for line in lines[1:]:
            if not line.strip():
                continue
            piece_str, lp = line.split("\t")
            pieces.append(tuple(int(t) for t in piece_str.split()))
            lps.append(float(lp))
        return cls(pieces, lps, base, len(pieces))

    def save(self, path: str | os.PathLike) -> None:
        tmp = Path(path).with_name(Path(path).name + ".tmp")
        try:
            tmp.write_text(self.to_text(), encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SubwordModel":
        try:
            return cls.from_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc


@dataclass(frozen=True)
class PieceSequence:
    """One utterance encoded as piece ids of a specific SubwordModel."""

    utterance_id: str
    piece_ids: list[int]
    model_fingerprint: str
    frame_rate_hz: float


def _normalize(counts: dict[tuple[int, ...], float]) -> dict[tuple[int, ...], float]:
    floored = {p: max(c, _COUNT_FLOOR) for p, c in counts.items()}
    total = sum(floored.values())
    return {p: math.log(c / total) for p, c in floored.items()}


def unigram_seed_vocab(
    corpus: list[TokenSequence],
    max_piece_len: int = 4,
    seed_vocab_size: int = 1_000_000,
) -> SubwordModel:
    """Seed model: all single tokens plus the most frequent substrings."""
    if not corpus:
        raise EmptyCorpus("empty training corpus")
    if max_piece_len < 1:
        raise InvalidConfig("max_piece_len must be >= 1")
    base = corpus[0].vocab_size
    counts: dict[tuple[int, ...], int] = {}
    for ts in corpus:
        if ts.vocab_size != base:
            raise VocabMismatch("corpus has inconsistent vocab sizes")
        seq = ts.tokens.tolist()
        n = len(seq)
        for i in range(n):
            for length in range(1, min(max_piece_len, n - i) + 1):
                p = tuple(seq[i : i + length])
                counts[p] = counts.get(p, 0) + 1

    singles = [(t,) for t in range(base)]
    multis = sorted(
        (p for p in counts if len(p) > 1),
        key=lambda p: (-counts[p], p),
    )
    budget = max(seed_vocab_size - base, 0)
    pieces = singles + multis[:budget]
    log_probs = _normalize({p: counts.get(p, 0) for p in pieces})
    return SubwordModel(
        pieces, [log_probs[p] for p in pieces], base, len(pieces)
    )


def _lattice_pieces(model: SubwordModel, seq: list[int]):
    """For each end position, the (piece_id, start, log_prob) arcs ending there."""
    n = len(seq)
    arcs: list[list[tuple[int, int, float]]] = [[] for _ in range(n + 1)]
    for end in range(1, n + 1):
        for length in range(1, min(model._max_piece_len, end) + 1):
            pid = model.piece_id(tuple(seq[end - length : end]))
            if pid is not None:
                arcs[end].append((pid, end - length, model.log_probs[pid]))
    return arcs


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _marginal_ll(arcs, n: int, skip: int | None = None) -> float:
    """Forward pass: log of the summed probability over all segmentations."""
    alpha = [-math.inf] * (n + 1)
    alpha[0] = 0.0
    for end in range(1, n + 1):
        acc = -math.inf
        for pid, start, lp in arcs[end]:
            if pid == skip or alpha[start] == -math.inf:
                continue
            acc = _logaddexp(acc, alpha[start] + lp)
        alpha[end] = acc
    return alpha[n]


def unigram_em_step(
    model: SubwordModel, corpus: list[TokenSequence]
) -> tuple[SubwordModel, float]:
    """One EM step; returns the new model and the pre-update log-likelihood."""
    counts = {p: 0.0 for p in model.pieces}
    total_ll = 0.0
    for ts in corpus:
        seq = ts.tokens.tolist()
        n = len(seq)
        if n == 0:
            continue
        arcs = _lattice_pieces(model, seq)
        alpha = [-math.inf] * (n + 1)
        alpha[0] = 0.0
        for end in range(1, n + 1):
            acc = -math.inf
            for _, start, lp in arcs[end]:
                if alpha[start] != -math.inf:
                    acc = _logaddexp(acc, alpha[start] + lp)
            alpha[end] = acc
        beta = [-math.inf] * (n + 1)
        beta[n] = 0.0
        for end in range(n, 0, -1):
            if beta[end] == -math.inf:
                continue
            for pid, start, lp in arcs[end]:
                beta[start] = _logaddexp(beta[start], beta[end] + lp)
        ll = alpha[n]
        total_ll += ll
        for end in range(1, n + 1):
            for pid, start, lp in arcs[end]:
                if alpha[start] == -math.inf or beta[end] == -math.inf:
                    continue
                counts[model.pieces[pid]] += math.exp(
                    alpha[start] + lp + beta[end] - ll
                )
    log_probs = _normalize(counts)
    new = SubwordModel(
        list(model.pieces),
        [log_probs[p] for p in model.pieces],
        model.base_vocab_size,
        model.target_vocab_size,
    )
    return new, total_ll


def _prune_to(
    model: SubwordModel, corpus: list[TokenSequence], keep_multi: int
) -> SubwordModel:
    """Keep the `keep_multi` multi-token pieces whose removal costs the most
    corpus likelihood; singles are never pruned."""
    multis = [p for p in model.pieces if len(p) > 1]
    if len(multis) <= keep_multi:
        return model

    # baseline per-utterance likelihoods and piece occurrence sets
    utt_ll: list[float] = []
    occurs: dict[int, list[int]] = {}
    lattices = []
    for ui, ts in enumerate(corpus):
        seq = ts.tokens.tolist()
        arcs = _lattice_pieces(model, seq)
        lattices.append((seq, arcs))
        utt_ll.append(_marginal_ll(arcs, len(seq)))
        seen = set()
        for end_arcs in arcs:
            for pid, _, _ in end_arcs:
                seen.add(pid)
        for pid in seen:
            occurs.setdefault(pid, []).append(ui)

    losses: dict[tuple[int, ...], float] = {}
    for p in multis:
        pid = model.piece_id(p)
        loss = 0.0
        for ui in occurs.get(pid, []):
            seq, arcs = lattices[ui]
            loss += utt_ll[ui] - _marginal_ll(arcs, len(seq), skip=pid)
        losses[p] = loss

    kept_multis = set(
        sorted(multis, key=lambda p: (-losses[p], p))[:keep_multi]
    )
    kept = [p for p in model.pieces if len(p) == 1 or p in kept_multis]
    probs = {p: math.exp(lp) for p, lp in zip(model.pieces, model.log_probs)}
    total = sum(probs[p] for p in kept)
    return SubwordModel(
        kept,
        [math.log(probs[p] / total) for p in kept],
        model.base_vocab_size,
        model.target_vocab_size,
    )


def unigram_prune(
    model: SubwordModel, corpus: list[TokenSequence], keep_fraction: float
) -> SubwordModel:
    """Drop the least-useful multi-token pieces, keeping ceil(frac * count)."""
    if not 0.0 < keep_fraction < 1.0:
        raise InvalidConfig("keep_fraction must be in (0, 1)")
    num_multi = sum(1 for p in model.pieces if len(p) > 1)
    return _prune_to(model, corpus, math.ceil(keep_fraction * num_multi))


def unigram_train(
    corpus: list[TokenSequence],
    target_vocab_size: int,
    max_piece_len: int = 4,
    seed_vocab_size: int | None = None,
    em_steps_per_round: int = 2,
    keep_fraction: float = 0.8,
) -> SubwordModel:
    """Train a unigram subword model down to target_vocab_size pieces."""
    if not corpus:
        raise EmptyCorpus("empty training corpus")
    base = corpus[0].vocab_size
    if target_vocab_size < base:
        raise TargetBelowBaseVocab(
            f"target {target_vocab_size} < base vocab {base}"
        )
    if seed_vocab_size is None:
        seed_vocab_size = max(4 * target_vocab_size, base + 1)
    model = unigram_seed_vocab(corpus, max_piece_len, seed_vocab_size)
    model.target_vocab_size = target_vocab_size

    if target_vocab_size == base:
        singles = [(t,) for t in range(base)]
        model = SubwordModel(
            singles, [math.log(1.0 / base)] * base, base, target_vocab_size
        )
        model, _ = unigram_em_step(model, corpus)
        return model

    while model.vocab_size > target_vocab_size:
        for _ in range(em_steps_per_round):
            model, _ = unigram_em_step(model, corpus)
        num_multi = model.vocab_size - base
        keep = max(
            math.ceil(keep_fraction * num_multi), target_vocab_size - base
        )
        if keep >= num_multi:
            keep = target_vocab_size - base
        model = _prune_to(model, corpus, keep)
    model, _ = unigram_em_step(model, corpus)
    return model


def encode(model: SubwordModel, ts: TokenSequence) -> PieceSequence:
    """Viterbi segmentation maximizing the summed piece log-probability.

    Ties break toward fewer pieces, then the lexicographically smallest
    piece-id sequence.
    """
    if ts.vocab_size != model.base_vocab_size:
        raise VocabMismatch(
            f"tokens vocab {ts.vocab_size} != model base {model.base_vocab_size}"
        )
    seq = ts.tokens.tolist()
    n = len(seq)
    arcs = _lattice_pieces(model, seq)
    # best[i] = (score, num_pieces, ids) for the suffix starting at i
    best: list[tuple[float, int, tuple[int, ...]] | None] = [None] * (n + 1)
    best[n] = (0.0, 0, ())
    for i in range(n - 1, -1, -1):
        cand = None
        for end in range(i + 1, min(i + model._max_piece_len, n) + 1):
            for pid, start, lp in arcs[end]:
                if start != i or best[end] is None:
                    continue
                score, cnt, ids = best[end]
                c = (score + lp, cnt + 1, (pid,) + ids)
                if (
                    cand is None
                    or c[0] > cand[0]
                    or (c[0] == cand[0] and (c[1], c[2]) < (cand[1], cand[2]))
                ):
                    cand = c
        best[i] = cand
    if best[0] is None:
        raise VocabMismatch("sequence not segmentable (missing coverage)")
    return PieceSequence(
        ts.utterance_id, list(best[0][2]), model.fingerprint(), ts.frame_rate_hz
    )


def decode(model: SubwordModel, ps: PieceSequence) -> TokenSequence:
    """Concatenate the referenced pieces back into base tokens."""
    if ps.model_fingerprint != model.fingerprint():
        raise FingerprintMismatch(
            f"{ps.utterance_id}: piece sequence was produced by another model"
        )
    tokens: list[int] = []
    for pid in ps.piece_ids:
        tokens.extend(model.pieces[pid])
    return TokenSequence(
        ps.utterance_id,
        np.asarray(tokens, dtype=np.int64),
        model.base_vocab_size,
        ps.frame_rate_hz,
    )


# --------------------------------------------------------------------------
# time masking


def time_mask(
    ts: TokenSequence,
    num_masks: int = 2,
    max_span_frames: int = 10,
    seed: int = 0,
) -> TokenSequence:
    """Replace up to num_masks random spans with the reserved mask id.

    The mask id is ts.vocab_size; the output vocab grows by one. Spans may
    overlap and clamp at the sequence end; length is preserved.
    """
    if num_masks < 0 or max_span_frames < 1:
        raise InvalidConfig("num_masks must be >= 0, max_span_frames >= 1")
    tokens = ts.tokens.copy()
    n = tokens.shape[0]
    rng = np.random.default_rng(seed)
    mask_id = ts.vocab_size
    if n > 0:
        for _ in range(num_masks):
            span = int(rng.integers(1, max_span_frames + 1))
            start = int(rng.integers(0, n))
            tokens[start : start + span] = mask_id
    return TokenSequence(
        ts.utterance_id,
        tokens,
        ts.vocab_size + 1,
        ts.frame_rate_hz,
        run_lengths=ts.run_lengths,
    )
