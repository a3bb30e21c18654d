import numpy as np
import pytest

from disctok import features
from disctok.errors import (
    BadMagic,
    HeaderMismatch,
    InvalidConfig,
    IoFailure,
    NonFiniteValue,
)
from disctok.features import (
    CorpusManifest,
    FeatureSequence,
    read_features,
    synth_corpus,
    write_features,
)


def test_round_trip_small(tmp_path):
    seq = FeatureSequence("a", np.array([[0.5]], np.float32), 50.0)
    write_features(seq, tmp_path / "a.dsft")
    back = read_features(tmp_path / "a.dsft")
    np.testing.assert_array_equal(back.frames, seq.frames)
    assert back.frame_rate_hz == 50.0


def test_round_trip_large_random(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.standard_normal((1000, 1024)).astype(np.float32)
    seq = FeatureSequence("big", frames, 50.0)
    write_features(seq, tmp_path / "big.dsft")
    back = read_features(tmp_path / "big.dsft")
    assert back.frames.tobytes() == frames.tobytes()


def test_empty_matrix(tmp_path):
    seq = FeatureSequence("e", np.empty((0, 1024), np.float32), 50.0)
    write_features(seq, tmp_path / "e.dsft")
    back = read_features(tmp_path / "e.dsft")
    assert back.num_frames == 0 and back.dim == 1024


def test_row_major_order(tmp_path):
    frames = np.arange(6, dtype=np.float32).reshape(2, 3)
    write_features(FeatureSequence("m", frames, 50.0), tmp_path / "m.dsft")
    back = read_features(tmp_path / "m.dsft")
    np.testing.assert_array_equal(back.frames, frames)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.dsft"
    write_features(
        FeatureSequence("t", np.ones((2, 3), np.float32), 50.0), path
    )
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])  # one value short
    with pytest.raises(HeaderMismatch):
        read_features(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "x.dsft"
    path.write_bytes(b"NOPE" + b"\x00" * 100)
    with pytest.raises(BadMagic):
        read_features(path)


def test_non_finite_rejected(tmp_path):
    path = tmp_path / "n.dsft"
    write_features(
        FeatureSequence("n", np.ones((1, 2), np.float32), 50.0), path
    )
    blob = bytearray(path.read_bytes())
    blob[-4:] = np.array([np.inf], "<f4").tobytes()
    path.write_bytes(bytes(blob))
    with pytest.raises(NonFiniteValue):
        read_features(path)
    with pytest.raises(NonFiniteValue):
        FeatureSequence("n", np.array([[np.nan]], np.float32), 50.0)


def test_unwritable_path(tmp_path):
    seq = FeatureSequence("a", np.ones((1, 1), np.float32), 50.0)
    with pytest.raises(IoFailure):
        write_features(seq, tmp_path / "missing_dir" / "a.dsft")


def test_manifest_round_trip(tmp_path):
    m = CorpusManifest([("a", tmp_path / "a.dsft", 3), ("b", tmp_path / "b.dsft", 5)])
    assert m.total_frames == 8
    m.save(tmp_path / "manifest.tsv")
    back = CorpusManifest.load(tmp_path / "manifest.tsv")
    assert back.entries == m.entries


def test_manifest_duplicate_ids():
    with pytest.raises(InvalidConfig):
        CorpusManifest([("a", "x", 1), ("a", "y", 2)])


def test_synth_deterministic(tmp_path):
    kw = dict(num_utts=3, frames_per_utt=40, dim=4, num_clusters=3,
              separation=10.0, seed=7)
    m1, t1, p1 = synth_corpus(tmp_path / "one", **kw)
    m2, t2, p2 = synth_corpus(tmp_path / "two", **kw)
    for utt in t1:
        np.testing.assert_array_equal(t1[utt], t2[utt])
        np.testing.assert_array_equal(p1[utt], p2[utt])
    f1 = read_features(m1.entries[0][1]).frames
    f2 = read_features(m2.entries[0][1]).frames
    assert f1.tobytes() == f2.tobytes()


def test_synth_frame_counts(tmp_path):
    m, tokens, phones = synth_corpus(
        tmp_path, num_utts=4, frames_per_utt=25, dim=3, num_clusters=2,
        separation=5.0, seed=0,
    )
    assert m.total_frames == 100
    assert all(len(v) == 25 for v in tokens.values())
    for utt, path, n in m.entries:
        assert read_features(path).num_frames == n


def test_synth_single_frame_utts(tmp_path):
    m, tokens, _ = synth_corpus(
        tmp_path, num_utts=5, frames_per_utt=1, dim=2, num_clusters=3,
        separation=5.0, seed=1,
    )
    assert all(len(v) == 1 for v in tokens.values())


def test_synth_separation_recoverable(tmp_path):
    # with huge separation, nearest-true-mean assignment is the oracle and
    # every frame sits closest to its own cluster mean
    m, tokens, _ = synth_corpus(
        tmp_path, num_utts=2, frames_per_utt=200, dim=4, num_clusters=2,
        separation=100.0, seed=3,
    )
    rng = np.random.default_rng(3)
    means = rng.standard_normal((2, 4))
    d2 = ((means[:, None, :] - means[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    means *= 100.0 / np.sqrt(d2.min())
    for utt, path, _ in m.entries:
        frames = read_features(path).frames.astype(np.float64)
        oracle = np.argmin(
            ((frames[:, None, :] - means[None, :, :]) ** 2).sum(-1), axis=1
        )
        np.testing.assert_array_equal(oracle, tokens[utt])


def test_synth_invalid_config(tmp_path):
    with pytest.raises(InvalidConfig):
        synth_corpus(tmp_path, 0, 1, 1, 1, 1.0, 0)
    with pytest.raises(InvalidConfig):
        synth_corpus(tmp_path, 1, 1, 1, 1, -1.0, 0)


def test_iter_corpus_validates_counts(tmp_path):
    m, _, _ = synth_corpus(
        tmp_path, num_utts=2, frames_per_utt=10, dim=2, num_clusters=2,
        separation=5.0, seed=0,
    )
    bad = CorpusManifest([(u, p, n + 1) for u, p, n in m.entries])
    with pytest.raises(HeaderMismatch):
        list(features.iter_corpus(bad))
