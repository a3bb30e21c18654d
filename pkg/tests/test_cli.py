import hashlib
from pathlib import Path

import numpy as np
import pytest

from disctok.cli import main
from disctok.config import PipelineConfig, load_config, save_config
from disctok.errors import InvalidConfig


def write_config(tmp_path, **synth_overrides) -> Path:
    cfg = PipelineConfig()
    cfg.manifest = tmp_path / "manifest.tsv"
    cfg.output_dir = tmp_path / "out"
    cfg.kmeans.k = 8
    cfg.kmeans.subsample_frames = 3000
    cfg.reduction.dedup = True
    cfg.reduction.subword = False
    cfg.synth.num_utts = 6
    cfg.synth.frames_per_utt = 120
    cfg.synth.dim = 4
    cfg.synth.num_clusters = 4
    cfg.synth.separation = 50.0
    cfg.synth.seed = 3
    for key, value in synth_overrides.items():
        setattr(cfg.synth, key, value)
    path = tmp_path / "pipeline.cfg"
    save_config(cfg, path)
    return path


def run(*argv) -> int:
    return main([str(a) for a in argv])


def test_config_round_trip(tmp_path):
    path = write_config(tmp_path)
    cfg = load_config(path)
    again = tmp_path / "again.cfg"
    save_config(cfg, again)
    assert path.read_text() == again.read_text()


def test_config_rejects_k_below_two(tmp_path):
    path = write_config(tmp_path)
    text = path.read_text().replace("k = 8", "k = 1")
    path.write_text(text)
    with pytest.raises(InvalidConfig):
        load_config(path)


def test_config_rejects_unknown_key(tmp_path):
    path = write_config(tmp_path)
    path.write_text(path.read_text() + "\n[kmeans]\nbogus = 1\n")
    with pytest.raises(Exception):
        load_config(path)


def test_missing_manifest_is_clean_error(tmp_path):
    path = write_config(tmp_path)
    assert run("train-kmeans", "--config", path) == 4


def test_bad_config_exit_code(tmp_path):
    path = write_config(tmp_path)
    code = run("train-kmeans", "--config", path, "--set", "kmeans.k=1")
    assert code == 2


def test_synth_then_full_pipeline(tmp_path):
    path = write_config(tmp_path)
    assert run("synth", "--config", path) == 0
    assert (tmp_path / "manifest.tsv").exists()
    assert (tmp_path / "out" / "phones.tsv").exists()

    assert run("train-kmeans", "--config", path) == 0
    assert (tmp_path / "out" / "codebook.dscb").exists()

    assert run("encode", "--config", path) == 0
    token_files = sorted((tmp_path / "out" / "tokens").glob("*.dstk"))
    assert len(token_files) == 6

    assert run("stats", "--config", path, "--report", tmp_path / "stats.txt") == 0
    assert "ratio_vs_raw" in (tmp_path / "stats.txt").read_text()

    assert (
        run(
            "eval",
            "--config",
            path,
            "--phones",
            tmp_path / "out" / "phones.tsv",
            "--report",
            tmp_path / "eval.txt",
        )
        == 0
    )
    report = (tmp_path / "eval.txt").read_text()
    assert "phn_pur" in report and "PNMI" in report


def test_eval_perfect_pipeline_metrics_are_one(tmp_path):
    # bijective cluster -> phone map, huge separation, k = true clusters
    path = write_config(tmp_path, separation=100.0)
    run("synth", "--config", path)
    run("train-kmeans", "--config", path, "--set", "kmeans.k=4")
    code = run(
        "eval", "--config", path, "--phones", tmp_path / "out" / "phones.tsv",
        "--report", tmp_path / "eval.txt",
    )
    assert code == 0
    text = (tmp_path / "eval.txt").read_text()
    values = dict(
        line.split() for line in text.splitlines() if len(line.split()) == 2
    )
    assert float(values["phn_pur"]) == 1.0
    assert float(values["dsc_pur"]) == 1.0
    assert float(values["PNMI"]) == 1.0


def test_eval_mismatched_lengths_exit_code(tmp_path):
    path = write_config(tmp_path)
    run("synth", "--config", path)
    run("train-kmeans", "--config", path)
    phones = tmp_path / "short_phones.tsv"
    lines = []
    for line in (tmp_path / "out" / "phones.tsv").read_text().splitlines():
        utt, field = line.split("\t")
        lines.append(f"{utt}\t{' '.join(field.split()[:-1])}\n")
    phones.write_text("".join(lines))
    assert run("eval", "--config", path, "--phones", phones) == 3


def test_encode_without_reduction_keeps_frame_count(tmp_path):
    from disctok.storage import read_token_file

    path = write_config(tmp_path)
    run("synth", "--config", path)
    run("train-kmeans", "--config", path)
    run("encode", "--config", path, "--set", "reduction.dedup=false")
    for f in (tmp_path / "out" / "tokens").glob("*.dstk"):
        ptf = read_token_file(f)
        assert ptf.num_tokens == 120
        assert not ptf.deduped


def test_encode_dedup_shorter_and_rerun_identical(tmp_path):
    path = write_config(tmp_path)
    run("synth", "--config", path)
    run("train-kmeans", "--config", path)
    run("encode", "--config", path)

    def digest():
        h = hashlib.sha256()
        for f in sorted((tmp_path / "out" / "tokens").glob("*.dstk")):
            h.update(f.read_bytes())
        return h.hexdigest()

    first = digest()
    from disctok.storage import read_token_file

    total = sum(
        read_token_file(f).num_tokens
        for f in (tmp_path / "out" / "tokens").glob("*.dstk")
    )
    assert total < 6 * 120  # dedup shortened something

    run("encode", "--config", path)
    assert digest() == first


def test_subword_pipeline(tmp_path):
    from disctok.storage import read_token_file

    path = write_config(tmp_path)
    overrides = [
        "--set", "reduction.subword=true",
        "--set", "reduction.subword_target_vocab=30",
        "--set", "kmeans.k=4",
    ]
    run("synth", "--config", path)
    run("train-kmeans", "--config", path, *overrides)
    assert run("train-subword", "--config", path, *overrides) == 0
    assert (tmp_path / "out" / "subword.model").exists()
    assert run("encode", "--config", path, *overrides) == 0
    for f in (tmp_path / "out" / "tokens").glob("*.dstk"):
        ptf = read_token_file(f)
        assert ptf.subworded and ptf.deduped
        assert ptf.vocab_size == 30


def test_masking_flags(tmp_path):
    from disctok.storage import read_token_file, unpack

    path = write_config(tmp_path)
    run("synth", "--config", path)
    run("train-kmeans", "--config", path)
    run("encode", "--config", path, "--set", "masking.num_masks=2")
    saw_mask = False
    for f in (tmp_path / "out" / "tokens").glob("*.dstk"):
        ptf = read_token_file(f)
        assert ptf.masked
        assert ptf.vocab_size == 9  # k + mask symbol
        if (unpack(ptf).tokens == 8).any():
            saw_mask = True
    assert saw_mask


def test_workers_do_not_change_outputs(tmp_path):
    path = write_config(tmp_path)
    run("synth", "--config", path)
    run("train-kmeans", "--config", path)
    run("encode", "--config", path)
    blobs = {
        f.name: f.read_bytes()
        for f in (tmp_path / "out" / "tokens").glob("*.dstk")
    }
    run("encode", "--config", path, "--set", "paths.workers=4")
    for f in (tmp_path / "out" / "tokens").glob("*.dstk"):
        assert f.read_bytes() == blobs[f.name]
