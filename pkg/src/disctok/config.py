"""Pipeline configuration: INI-style key/value file with section headers.

All randomness in the pipeline flows from the seeds recorded here, so a
config file fully determines every artifact byte.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig, IoFailure


@dataclass
class KmeansConfig:
    k: int = 2000
    seed: int = 0
    max_iters: int = 100
    rel_tol: float = 1e-6
    subsample_frames: int = 100_000


@dataclass
class ReductionConfig:
    dedup: bool = True
    subword: bool = False
    subword_target_vocab: int = 6000
    subword_max_piece_len: int = 4
    subword_seed: int = 0


@dataclass
class MaskingConfig:
    num_masks: int = 0
    max_span_frames: int = 10
    seed: int = 0


@dataclass
class SynthConfig:
    num_utts: int = 20
    frames_per_utt: int = 500
    dim: int = 8
    num_clusters: int = 8
    separation: float = 40.0
    persistence: float = 0.7
    frame_rate_hz: float = 50.0
    num_phones: int = 0  # 0 means bijective (= num_clusters)
    seed: int = 0


@dataclass
class PipelineConfig:
    manifest: Path = Path("manifest.tsv")
    output_dir: Path = Path("out")
    workers: int = 1
    kmeans: KmeansConfig = field(default_factory=KmeansConfig)
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    masking: MaskingConfig = field(default_factory=MaskingConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> None:
        if self.kmeans.k < 2:
            raise InvalidConfig("kmeans.k must be >= 2")
        if self.reduction.subword and (
            self.reduction.subword_target_vocab < self.kmeans.k
        ):
            raise InvalidConfig(
                "reduction.subword_target_vocab must be >= kmeans.k"
            )
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")

    @property
    def codebook_path(self) -> Path:
        return self.output_dir / "codebook.dscb"

    @property
    def subword_model_path(self) -> Path:
        return self.output_dir / "subword.model"

    @property
    def token_dir(self) -> Path:
        return self.output_dir / "tokens"


_SECTIONS = {
    "kmeans": KmeansConfig,
    "reduction": ReductionConfig,
    "masking": MaskingConfig,
    "synth": SynthConfig,
}


def _parse_value(current, text: str):
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise InvalidConfig(f"expected boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, Path):
        return Path(text)
    return text


def load_config(path: str | os.PathLike) -> PipelineConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise InvalidConfig(f"malformed config: {exc}") from exc
    cfg = PipelineConfig()
    for section in parser.sections():
        if section == "paths":
            for key, value in parser.items(section):
                if not hasattr(cfg, key):
                    raise InvalidConfig(f"unknown key paths.{key}")
                setattr(cfg, key, _parse_value(getattr(cfg, key), value))
        elif section in _SECTIONS:
            sub = getattr(cfg, section)
            for key, value in parser.items(section):
                if not hasattr(sub, key):
                    raise InvalidConfig(f"unknown key {section}.{key}")
                setattr(sub, key, _parse_value(getattr(sub, key), value))
        else:
            raise InvalidConfig(f"unknown config section [{section}]")
    cfg.validate()
    return cfg


def save_config(cfg: PipelineConfig, path: str | os.PathLike) -> None:
    parser = configparser.ConfigParser()
    parser["paths"] = {
        "manifest": str(cfg.manifest),
        "output_dir": str(cfg.output_dir),
        "workers": str(cfg.workers),
    }
    for name, _ in _SECTIONS.items():
        sub = getattr(cfg, name)
        parser[name] = {
            k: str(v).lower() if isinstance(v, bool) else str(v)
            for k, v in vars(sub).items()
        }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            parser.write(fh)
    except OSError as exc:
        raise IoFailure(f"cannot write config: {exc}") from exc


def apply_overrides(cfg: PipelineConfig, overrides: list[str]) -> None:
    """Apply --set SECTION.KEY=VALUE command-line overrides."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise InvalidConfig(f"override must be SECTION.KEY=VALUE: {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section == "paths":
            target = cfg
        elif section in _SECTIONS:
            target = getattr(cfg, section)
        else:
            raise InvalidConfig(f"unknown section in override: {section}")
        if not hasattr(target, key):
            raise InvalidConfig(f"unknown key in override: {dotted}")
        setattr(target, key, _parse_value(getattr(target, key), value))
    cfg.validate()
