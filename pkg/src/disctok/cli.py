"""Command-line front end wiring the pipeline end to end.

Subcommands: synth, train-kmeans, encode, train-subword, stats, eval.
Exit codes: 0 success, 2 config error, 3 data error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import features, kmeans, metrics, storage, tokenize
from .config import PipelineConfig, apply_overrides, load_config
from .errors import ConfigError, DataError, IoFailure

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4


def _emit(text: str, report_path: str | None) -> None:
    print(text)
    if report_path:
        Path(report_path).write_text(text + "\n", encoding="utf-8")


def _load(args) -> PipelineConfig:
    cfg = load_config(args.config)
    apply_overrides(cfg, args.set or [])
    return cfg


def _read_phone_tsv(path: str) -> dict[str, np.ndarray]:
    labels = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt, field = line.split("\t")
        labels[utt] = np.array([int(x) for x in field.split()], dtype=np.int64)
    return labels


def _write_label_tsv(labels: dict[str, np.ndarray], path: Path) -> None:
    lines = [
        f"{utt}\t{' '.join(map(str, seq.tolist()))}\n"
        for utt, seq in labels.items()
    ]
    path.write_text("".join(lines), encoding="utf-8")


def cmd_synth(args) -> int:
    cfg = _load(args)
    s = cfg.synth
    out_dir = cfg.output_dir / "features"
    manifest, tokens, phones = features.synth_corpus(
        out_dir,
        num_utts=s.num_utts,
        frames_per_utt=s.frames_per_utt,
        dim=s.dim,
        num_clusters=s.num_clusters,
        separation=s.separation,
        seed=s.seed,
        persistence=s.persistence,
        frame_rate_hz=s.frame_rate_hz,
        num_phones=s.num_phones or None,
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    manifest.save(cfg.manifest)
    _write_label_tsv(tokens, cfg.output_dir / "true_tokens.tsv")
    _write_label_tsv(phones, cfg.output_dir / "phones.tsv")
    _emit(
        f"synthesized {s.num_utts} utts x {s.frames_per_utt} frames "
        f"(dim {s.dim}, {s.num_clusters} clusters) -> {cfg.manifest}",
        args.report,
    )
    return 0


def cmd_train_kmeans(args) -> int:
    cfg = _load(args)
    manifest = features.CorpusManifest.load(cfg.manifest)
    data = kmeans.subsample_frames(
        manifest, cfg.kmeans.subsample_frames, cfg.kmeans.seed
    )
    codebook, history = kmeans.lloyd_fit(
        data,
        cfg.kmeans.k,
        max_iters=cfg.kmeans.max_iters,
        rel_tol=cfg.kmeans.rel_tol,
        seed=cfg.kmeans.seed,
        workers=cfg.workers,
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    kmeans.save_codebook(codebook, cfg.codebook_path)
    lines = [
        f"k={codebook.k} dim={codebook.dim} frames={data.shape[0]} "
        f"iterations={codebook.iterations_run}",
    ]
    lines += [f"iter {i}: inertia {v:.6f}" for i, v in enumerate(history)]
    lines.append(f"codebook -> {cfg.codebook_path}")
    _emit("\n".join(lines), args.report)
    return 0


def _raw_token_corpus(cfg: PipelineConfig) -> list[kmeans.TokenSequence]:
    codebook = kmeans.load_codebook(cfg.codebook_path)
    manifest = features.CorpusManifest.load(cfg.manifest)

    def one(seq):
        return kmeans.assign(codebook, seq)

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, features.iter_corpus(manifest)))


def _reduced_corpus(cfg: PipelineConfig, raw: list[kmeans.TokenSequence]):
    """Apply dedup/subword per config. Returns (sequences, flags)."""
    seqs = raw
    if cfg.reduction.dedup:
        seqs = [tokenize.dedup(ts) for ts in seqs]
    model = None
    if cfg.reduction.subword:
        model = tokenize.SubwordModel.load(cfg.subword_model_path)
        pieces = [tokenize.encode(model, ts) for ts in seqs]
        seqs = [
            kmeans.TokenSequence(
                ps.utterance_id,
                np.asarray(ps.piece_ids, dtype=np.int64),
                model.vocab_size,
                ps.frame_rate_hz,
            )
            for ps in pieces
        ]
    return seqs, model


def cmd_train_subword(args) -> int:
    cfg = _load(args)
    if not cfg.reduction.subword:
        raise ConfigError("reduction.subword is disabled in this config")
    raw = _raw_token_corpus(cfg)
    corpus = [tokenize.dedup(ts) for ts in raw] if cfg.reduction.dedup else raw
    model = tokenize.unigram_train(
        corpus,
        cfg.reduction.subword_target_vocab,
        max_piece_len=cfg.reduction.subword_max_piece_len,
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    model.save(cfg.subword_model_path)
    _emit(
        f"subword model: {model.vocab_size} pieces "
        f"(base {model.base_vocab_size}) -> {cfg.subword_model_path}",
        args.report,
    )
    return 0


def cmd_encode(args) -> int:
    cfg = _load(args)
    raw = _raw_token_corpus(cfg)
    seqs, _ = _reduced_corpus(cfg, raw)
    masked = cfg.masking.num_masks > 0
    if masked:
        seqs = [
            tokenize.time_mask(
                ts,
                num_masks=cfg.masking.num_masks,
                max_span_frames=cfg.masking.max_span_frames,
                seed=cfg.masking.seed + i,
            )
            for i, ts in enumerate(seqs)
        ]
    cfg.token_dir.mkdir(parents=True, exist_ok=True)

    def one(ts):
        ptf = storage.pack(
            ts,
            subworded=cfg.reduction.subword,
            masked=masked,
            deduped=cfg.reduction.dedup,
        )
        storage.write_token_file(ptf, cfg.token_dir / f"{ts.utterance_id}.dstk")
        return len(ts)

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        lengths = list(pool.map(one, seqs))
    raw_mean = sum(len(ts) for ts in raw) / len(raw)
    out_mean = sum(lengths) / len(lengths)
    _emit(
        f"encoded {len(seqs)} utts -> {cfg.token_dir}\n"
        f"mean length: raw {raw_mean:.1f}, stored {out_mean:.1f}",
        args.report,
    )
    return 0


def cmd_stats(args) -> int:
    cfg = _load(args)
    lines = ["per-second data size (bits), by format:"]
    for kind in storage.FormatKind:
        model = storage.SizeModel(kind)
        lines.append(f"  {kind.value:<18} {size_row(model)}")
    manifest = features.CorpusManifest.load(cfg.manifest)
    frame_rate = None
    before_lengths = {utt: n for utt, _, n in manifest.entries}
    if manifest.entries:
        frame_rate = features.read_features(manifest.entries[0][1]).frame_rate_hz
    duration = (
        manifest.total_frames / frame_rate if frame_rate else 0.0
    )
    report = storage.measure_corpus(cfg.token_dir, duration_s=duration or None)
    lines.append("")
    lines.append(f"corpus: {report['num_files']} token files, "
                 f"{report['total_tokens']} tokens, {report['total_bytes']} bytes")
    if before_lengths and report["num_files"]:
        before_mean = sum(before_lengths.values()) / len(before_lengths)
        after_mean = report["total_tokens"] / report["num_files"]
        reduction = 1.0 - after_mean / before_mean if before_mean else 0.0
        lines.append(
            f"avg input length: {before_mean:.1f} -> {after_mean:.1f} "
            f"(reduction {reduction:.1%})"
        )
    for key in ("ratio_vs_raw", "ratio_vs_ssl"):
        if key in report:
            lines.append(f"{key} = x{report[key]:.1f}")
    _emit("\n".join(lines), args.report)
    return 0


def size_row(model: storage.SizeModel) -> str:
    bits = storage.size_bits(model, 1.0)
    return f"{bits:>12.0f} bits/s"


def cmd_eval(args) -> int:
    cfg = _load(args)
    # quality metrics are defined on raw frame-rate tokens, before any
    # length reduction
    raw = _raw_token_corpus(cfg)
    phones = _read_phone_tsv(args.phones)
    table = metrics.joint_counts(raw, phones)
    text, _ = metrics.format_report(table)
    _emit(text, args.report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disctok",
        description="Discrete speech-token pipeline: quantize, reduce, pack, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="pipeline config file")
        p.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value",
        )
        p.add_argument("--report", help="also write the report to this path")

    for name, fn, extra in (
        ("synth", cmd_synth, None),
        ("train-kmeans", cmd_train_kmeans, None),
        ("train-subword", cmd_train_subword, None),
        ("encode", cmd_encode, None),
        ("stats", cmd_stats, None),
        ("eval", cmd_eval, "phones"),
    ):
        p = sub.add_parser(name)
        common(p)
        if extra == "phones":
            p.add_argument("--phones", required=True, help="phone-label TSV")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IoFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
