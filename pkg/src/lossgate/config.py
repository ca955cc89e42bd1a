"""Run configuration: dataclasses with documented defaults, a flat
``section.key = value`` text format, and the seeding policy.

Every random draw in a run descends from one global seed through named,
numbered substreams (corpus generation, trials, encoder init, pretraining,
clustering, classifier init, classification epochs, toy corpus). Lists are
written as comma-separated values; ``inf`` is accepted for floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .gated import IterationRecord
from .seeding import STREAMS, child_rng, child_seed

__all__ = [
    "STREAMS", "child_rng", "child_seed",
    "CorpusConfig", "EncoderConfig", "Stage1Config", "ClusterConfig", "Stage2Config",
    "EvalConfig", "ToyConfig", "AblateConfig", "RunConfig",
    "parse_config_text", "load_config", "validate_config",
]


@dataclass(frozen=True)
class CorpusConfig:
    num_speakers: int = 40
    utts_per_speaker: int = 50
    frames_per_utt: int = 64
    feature_dim: int = 8
    intra_spread: float = 0.8
    inter_spread: float = 1.0


@dataclass(frozen=True)
class EncoderConfig:
    hidden: tuple[int, ...] = (64, 64)
    embedding_dim: int = 32


@dataclass(frozen=True)
class Stage1Config:
    batch_size: int = 16
    epochs: int = 10
    lr: float = 1e-3
    lr_decay: float = 0.95
    lr_decay_every: int = 5
    segment_len: int = 20
    noise_scale: float = 0.1
    gain_lo: float = 0.8
    gain_hi: float = 1.2


@dataclass(frozen=True)
class ClusterConfig:
    k: int = 0  # 0 = one cluster per true speaker
    restarts: int = 5
    max_iters: int = 100
    elbow_ks: tuple[int, ...] = ()


@dataclass(frozen=True)
class Stage2Config:
    taus: tuple[float, ...] = (1.0, 3.0, 3.0, 5.0, 6.0)
    epochs_plain: int = 5
    epochs_gated: int = 5
    crop_len: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    margin: float = 0.2
    scale: float = 30.0
    noise_scale: float = 0.1
    gain_lo: float = 0.9
    gain_hi: float = 1.1


@dataclass(frozen=True)
class EvalConfig:
    num_trials: int = 2000


@dataclass(frozen=True)
class ToyConfig:
    num_speakers: int = 10
    utts_per_speaker: int = 100
    corrupt_fraction: float = 0.2
    epochs: int = 15
    warmup_epochs: int = 5
    label_source: str = "noise"  # "noise" or "kmeans"
    pretrain_epochs: int = 0


@dataclass(frozen=True)
class AblateConfig:
    taus: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0, math.inf)
    k_factors: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    stage1: Stage1Config = field(default_factory=Stage1Config)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    eval: EvalConfig = field(default_factory=EvalConfig)
    toy: ToyConfig = field(default_factory=ToyConfig)
    ablate: AblateConfig = field(default_factory=AblateConfig)
    seed: int = 42
    out_dir: str = "runs/latest"

    def resolved_k(self) -> int:
        return self.cluster.k if self.cluster.k > 0 else self.corpus.num_speakers

    def schedule(self) -> tuple[IterationRecord, ...]:
        k = self.resolved_k()
        return tuple(
            IterationRecord(
                tau=tau,
                epochs_plain=self.stage2.epochs_plain,
                epochs_gated=self.stage2.epochs_gated,
                cluster_k=k,
            )
            for tau in self.stage2.taus
        )


_SECTIONS = {
    "corpus": CorpusConfig,
    "encoder": EncoderConfig,
    "stage1": Stage1Config,
    "cluster": ClusterConfig,
    "stage2": Stage2Config,
    "eval": EvalConfig,
    "toy": ToyConfig,
    "ablate": AblateConfig,
}


def _parse_float(text: str) -> float:
    text = text.strip().lower()
    if text in ("inf", "+inf", "infinity"):
        return math.inf
    return float(text)


def _convert(raw: str, annotation) -> object:
    raw = raw.strip()
    if annotation == "int":
        return int(raw)
    if annotation == "float":
        return _parse_float(raw)
    if annotation == "str":
        return raw
    if annotation.startswith("tuple[int"):
        return tuple(int(v) for v in raw.split(",") if v.strip()) if raw else ()
    if annotation.startswith("tuple[float"):
        return tuple(_parse_float(v) for v in raw.split(",") if v.strip()) if raw else ()
    raise ConfigError(f"unsupported config field type {annotation!r}")


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply ``section.key = value`` lines on top of defaults (or ``base``)."""
    cfg = base if base is not None else RunConfig()
    sections = {name: getattr(cfg, name) for name in _SECTIONS}
    top: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key == "seed":
            top["seed"] = int(raw.strip())
            continue
        if key == "out_dir":
            top["out_dir"] = raw.strip()
            continue
        if "." not in key:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        cls = _SECTIONS[section]
        matching = [f for f in fields(cls) if f.name == name]
        if not matching:
            raise ConfigError(f"line {lineno}: unknown key {name!r} in section {section!r}")
        try:
            value = _convert(raw, matching[0].type)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
        sections[section] = replace(sections[section], **{name: value})
    return replace(cfg, **sections, **top)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), base=base)


def validate_config(cfg: RunConfig) -> RunConfig:
    """Raise ConfigError on any invalid field before compute starts."""
    c = cfg.corpus
    if min(c.num_speakers, c.utts_per_speaker, c.frames_per_utt, c.feature_dim) < 1:
        raise ConfigError("corpus dimensions must all be >= 1")
    if c.intra_spread < 0 or c.inter_spread <= 0:
        raise ConfigError("corpus spreads must satisfy intra >= 0 and inter > 0")
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0")
    s1 = cfg.stage1
    if s1.batch_size < 2:
        raise ConfigError("stage1.batch_size must be >= 2")
    if s1.epochs < 0 or s1.lr <= 0 or not (0 < s1.lr_decay <= 1) or s1.lr_decay_every < 1:
        raise ConfigError("invalid stage-1 schedule")
    if c.frames_per_utt < 2 * s1.segment_len:
        raise ConfigError("frames_per_utt must be >= 2 * stage1.segment_len")
    if s1.noise_scale < 0 or not (0 < s1.gain_lo <= s1.gain_hi):
        raise ConfigError("invalid stage-1 augmentation parameters")
    s2 = cfg.stage2
    if not s2.taus or any(t <= 0 for t in s2.taus):
        raise ConfigError("stage2.taus must be a nonempty list of positive values")
    if s2.epochs_plain < 0 or s2.epochs_gated < 0 or s2.batch_size < 1 or s2.lr <= 0:
        raise ConfigError("invalid stage-2 training parameters")
    if not (0 <= s2.margin < math.pi / 2) or s2.scale <= 0:
        raise ConfigError("stage2 margin must lie in [0, pi/2) and scale must be positive")
    if c.frames_per_utt < s2.crop_len:
        raise ConfigError("frames_per_utt must be >= stage2.crop_len")
    if s2.noise_scale < 0 or not (0 < s2.gain_lo <= s2.gain_hi):
        raise ConfigError("invalid stage-2 augmentation parameters")
    cl = cfg.cluster
    if cl.k < 0 or cl.restarts < 1 or cl.max_iters < 1:
        raise ConfigError("invalid cluster parameters")
    if cfg.eval.num_trials < 2:
        raise ConfigError("eval.num_trials must be >= 2")
    t = cfg.toy
    if t.num_speakers < 2 or t.utts_per_speaker < 1:
        raise ConfigError("toy corpus needs >= 2 speakers")
    if not (0 <= t.corrupt_fraction <= 1):
        raise ConfigError("toy.corrupt_fraction must lie in [0, 1]")
    if t.epochs < 1 or t.warmup_epochs < 0 or t.warmup_epochs >= t.epochs:
        raise ConfigError("toy needs warmup_epochs < epochs")
    if t.label_source not in ("noise", "kmeans"):
        raise ConfigError("toy.label_source must be 'noise' or 'kmeans'")
    if not cfg.ablate.taus or not cfg.ablate.k_factors:
        raise ConfigError("ablation sweeps must be nonempty")
    return cfg
