"""Synthetic multi-speaker corpus: generation, segment sampling, augmentation,
verification trials, and controlled label corruption.

Data model: each speaker gets a mean feature vector drawn at scale
``inter_spread``; every frame of every utterance of that speaker is the mean
plus Gaussian noise at scale ``intra_spread``. Ground-truth speaker ids ride
along on each utterance but are read only by corpus construction and by
evaluation code; training loops must never touch ``truth_speaker``.

File formats
------------
Corpus file (binary, little-endian):
    magic ``b"LGCORPS1"``
    4x int64 header: num_utterances, num_speakers, feature_dim, seed
    per utterance: int64 id, int64 truth_speaker, int64 num_frames,
    then num_frames*feature_dim float64 frames, row-major.
Trial list (text): one line per trial, ``<utt_a> <utt_b> <0|1>``.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

_CORPUS_MAGIC = b"LGCORPS1"


@dataclass(frozen=True)
class Utterance:
    id: int
    truth_speaker: int  # hidden ground truth: evaluation-only, never read by training
    frames: np.ndarray  # (num_frames, feature_dim) float64


@dataclass(frozen=True)
class Corpus:
    utterances: tuple[Utterance, ...]
    num_speakers: int
    feature_dim: int
    seed: int

    def __len__(self) -> int:
        return len(self.utterances)

    def stacked_frames(self) -> np.ndarray:
        """All utterance frames as one (n, T, F) array; requires uniform length."""
        lengths = {u.frames.shape[0] for u in self.utterances}
        if len(lengths) != 1:
            raise DomainError("utterance lengths are not uniform; cannot stack")
        return np.stack([u.frames for u in self.utterances])

    def truth_labels(self) -> np.ndarray:
        """Ground-truth speaker id per utterance, indexed by utterance id.

        Evaluation-only helper; training code must not call this.
        """
        return np.array([u.truth_speaker for u in self.utterances], dtype=np.int64)


@dataclass(frozen=True)
class TrialPair:
    utt_a: int
    utt_b: int
    is_target: bool


def generate_corpus(
    num_speakers: int,
    utts_per_speaker: int,
    frames_per_utt: int,
    feature_dim: int,
    intra_spread: float,
    inter_spread: float,
    seed: int,
) -> Corpus:
    """Build a corpus of ``num_speakers * utts_per_speaker`` utterances.

    Deterministic in ``seed``. ``intra_spread`` may be 0 (every frame of a
    speaker then equals the speaker mean); ``inter_spread`` must be positive.
    """
    if num_speakers < 1 or utts_per_speaker < 1 or frames_per_utt < 1 or feature_dim < 1:
        raise ConfigError("corpus dimensions must all be >= 1")
    if intra_spread < 0:
        raise ConfigError("intra_spread must be >= 0")
    if inter_spread <= 0:
        raise ConfigError("inter_spread must be > 0")
    if inter_spread <= intra_spread:
        logger.warning(
            "inter_spread (%.3g) <= intra_spread (%.3g): corpus may not be learnable",
            inter_spread,
            intra_spread,
        )
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    means = rng.normal(0.0, inter_spread, size=(num_speakers, feature_dim))
    utts = []
    uid = 0
    for s in range(num_speakers):
        for _ in range(utts_per_speaker):
            noise = rng.normal(0.0, intra_spread, size=(frames_per_utt, feature_dim))
            utts.append(Utterance(id=uid, truth_speaker=s, frames=means[s] + noise))
            uid += 1
    return Corpus(
        utterances=tuple(utts),
        num_speakers=num_speakers,
        feature_dim=feature_dim,
        seed=int(seed),
    )


def sample_segments(utt: Utterance, seg_len: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two non-overlapping contiguous frame windows of length ``seg_len``.

    The left window start is uniform over feasible positions, the right
    window uniform to its right, and the returned order is coin-flipped.
    """
    if seg_len < 1:
        raise DomainError("segment length must be >= 1")
    total = utt.frames.shape[0]
    if total < 2 * seg_len:
        raise DomainError(
            f"utterance {utt.id} has {total} frames, too short for two segments of {seg_len}"
        )
    left = int(rng.integers(0, total - 2 * seg_len + 1))
    right = int(rng.integers(left + seg_len, total - seg_len + 1))
    first = utt.frames[left : left + seg_len].copy()
    second = utt.frames[right : right + seg_len].copy()
    if rng.random() < 0.5:
        first, second = second, first
    return first, second


def augment(
    segment: np.ndarray,
    noise_scale: float,
    gain_range: tuple[float, float],
    rng: np.random.Generator,
) -> np.ndarray:
    """gain * (segment + gaussian noise), gain uniform in ``gain_range``."""
    lo, hi = gain_range
    if noise_scale < 0:
        raise ConfigError("noise_scale must be >= 0")
    if not (0 < lo <= hi):
        raise ConfigError(f"gain range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
    noise = rng.normal(0.0, noise_scale, size=segment.shape)
    gain = float(rng.uniform(lo, hi))
    return gain * (segment + noise)


def make_trials(corpus: Corpus, num_pairs: int, seed: int) -> list[TrialPair]:
    """Balanced verification trial list: ceil(n/2) target pairs, floor(n/2) nontarget.

    Pairs are distinct (unordered) and never pair an utterance with itself.
    Deterministic in ``seed``.
    """
    if corpus.num_speakers < 2:
        raise ConfigError("trial construction needs a corpus with >= 2 speakers")
    if num_pairs < 1:
        raise ConfigError("num_pairs must be >= 1")
    by_speaker: dict[int, list[int]] = {}
    for u in corpus.utterances:
        by_speaker.setdefault(u.truth_speaker, []).append(u.id)
    n = len(corpus)
    target_pool = sum(len(v) * (len(v) - 1) // 2 for v in by_speaker.values())
    nontarget_pool = n * (n - 1) // 2 - target_pool
    want_target = (num_pairs + 1) // 2
    want_nontarget = num_pairs // 2
    if want_target > target_pool:
        raise ConfigError(f"requested {want_target} target pairs but only {target_pool} exist")
    if want_nontarget > nontarget_pool:
        raise ConfigError(f"requested {want_nontarget} nontarget pairs but only {nontarget_pool} exist")

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    speakers = sorted(s for s, v in by_speaker.items() if len(v) >= 2)
    trials: list[TrialPair] = []
    seen: set[tuple[int, int]] = set()

    def draw(want: int, target: bool) -> None:
        attempts = 0
        cap = 200 * want + 1000
        while sum(1 for t in trials if t.is_target == target) < want:
            attempts += 1
            if attempts > cap:
                raise ConfigError("trial sampling exhausted; request too close to the pool size")
            if target:
                s = speakers[int(rng.integers(len(speakers)))]
                a, b = rng.choice(by_speaker[s], size=2, replace=False)
            else:
                a, b = rng.choice(n, size=2, replace=False)
                if corpus.utterances[int(a)].truth_speaker == corpus.utterances[int(b)].truth_speaker:
                    continue
            key = (min(int(a), int(b)), max(int(a), int(b)))
            if key in seen:
                continue
            seen.add(key)
            trials.append(TrialPair(utt_a=key[0], utt_b=key[1], is_target=target))

    draw(want_target, True)
    draw(want_nontarget, False)
    return trials


def inject_label_noise(
    labels: np.ndarray,
    corrupt_fraction: float,
    num_classes: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Reassign exactly round(fraction * n) entries to a uniformly random different class.

    Returns (corrupted labels, boolean mask of which entries were changed).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not (0.0 <= corrupt_fraction <= 1.0):
        raise ConfigError("corrupt_fraction must lie in [0, 1]")
    if corrupt_fraction > 0 and num_classes < 2:
        raise ConfigError("cannot corrupt labels with fewer than 2 classes")
    n = labels.size
    num_corrupt = int(round(corrupt_fraction * n))
    mask = np.zeros(n, dtype=bool)
    out = labels.copy()
    if num_corrupt == 0:
        return out, mask
    idx = rng.choice(n, size=num_corrupt, replace=False)
    for i in idx:
        new = int(rng.integers(num_classes - 1))
        if new >= out[i]:
            new += 1
        out[i] = new
        mask[i] = True
    return out, mask


# ---------------------------------------------------------------------------
# file I/O


def save_corpus(path, corpus: Corpus) -> None:
    with open(path, "wb") as fh:
        fh.write(_CORPUS_MAGIC)
        fh.write(struct.pack("<3qQ", len(corpus), corpus.num_speakers, corpus.feature_dim, corpus.seed))
        for u in corpus.utterances:
            fh.write(struct.pack("<3q", u.id, u.truth_speaker, u.frames.shape[0]))
            fh.write(np.ascontiguousarray(u.frames, dtype="<f8").tobytes())


def load_corpus(path) -> Corpus:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _CORPUS_MAGIC:
            raise DomainError(f"not a corpus file (bad magic {magic!r})")
        n, num_speakers, feature_dim, seed = struct.unpack("<3qQ", fh.read(32))
        utts = []
        for _ in range(n):
            uid, spk, num_frames = struct.unpack("<3q", fh.read(24))
            raw = fh.read(num_frames * feature_dim * 8)
            frames = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(num_frames, feature_dim)
            utts.append(Utterance(id=uid, truth_speaker=spk, frames=frames))
    return Corpus(utterances=tuple(utts), num_speakers=num_speakers, feature_dim=feature_dim, seed=seed)


def save_trials(path, trials: list[TrialPair]) -> None:
    with open(path, "w") as fh:
        for t in trials:
            fh.write(f"{t.utt_a} {t.utt_b} {int(t.is_target)}\n")


def load_trials(path) -> list[TrialPair]:
    trials = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b, flag = line.split()
            trials.append(TrialPair(utt_a=int(a), utt_b=int(b), is_target=bool(int(flag))))
    return trials
