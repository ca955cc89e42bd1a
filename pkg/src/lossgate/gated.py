"""Pseudo-label classification with an additive angular margin, the per-sample
loss gate, and the cluster-train-gate iteration controller.

The classifier is a single cosine layer: one unit-norm anchor row per pseudo
class. For a sample with label y the logits are s*cos(theta_c) for c != y and
s*cos(theta_y + m) for the true class, where theta is the arccos of the
clamped embedding/anchor cosine; the loss is softmax cross-entropy on those
logits. Gating keeps only samples whose loss is strictly below tau; gradients
flow through the kept samples alone.

The controller runs, per iteration: embed everything, cluster, train a fresh
classifier with the gate disabled, then continue with the gate enabled at
that iteration's tau. The encoder carries across iterations; the classifier
and optimizer moments do not.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cluster import KMeansResult, kmeans
from .corpus import Corpus
from .encoder import EncoderParams, encode_batch, encode_batch_backward
from .errors import ConfigError, DomainError
from .mathops import row_softmax
from .metrics import RunReport, cluster_accuracy, eer, nmi, reliable_mask
from .optim import AdamOptimizer
from .seeding import child_rng, child_seed

logger = logging.getLogger(__name__)

_SIN_FLOOR = 1e-9  # keeps the margin derivative finite at theta in {0, pi}


@dataclass(frozen=True)
class ClassifierParams:
    """Anchor matrix (num_classes, d); rows kept unit-norm."""

    anchors: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.anchors.shape[0]


@dataclass(frozen=True)
class GateReport:
    """Per-sample losses and the selection they induce, for one training epoch."""

    losses: np.ndarray  # (n,) loss per utterance id
    selected: np.ndarray  # (n,) bool, selected[i] == (losses[i] < tau)
    tau: float
    selection_fraction: float
    phase: str = "gated"  # "plain" when the gate was disabled
    epoch: int = 0


@dataclass(frozen=True)
class IterationRecord:
    tau: float
    epochs_plain: int
    epochs_gated: int
    cluster_k: int


@dataclass(frozen=True)
class IterationResult:
    report: RunReport
    gate_reports: tuple[GateReport, ...]
    labels: np.ndarray
    kmeans_result: KMeansResult


def init_classifier(num_classes: int, dim: int, seed: int) -> ClassifierParams:
    if num_classes < 1 or dim < 1:
        raise ConfigError("classifier needs num_classes >= 1 and dim >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3]))
    anchors = rng.normal(0.0, 1.0, size=(num_classes, dim))
    anchors /= np.linalg.norm(anchors, axis=1)[:, None]
    return ClassifierParams(anchors=anchors)


def _renormalize(anchors: np.ndarray) -> np.ndarray:
    return anchors / np.linalg.norm(anchors, axis=1)[:, None]


def aam_batch(
    embeddings: np.ndarray,
    labels: np.ndarray,
    anchors: np.ndarray,
    margin: float,
    scale: float,
) -> tuple[np.ndarray, dict]:
    """Per-sample angular-margin losses for a batch. Returns (losses (B,), cache)."""
    e = np.asarray(embeddings, dtype=np.float64)
    w = np.asarray(anchors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).ravel()
    if e.ndim != 2 or w.ndim != 2 or e.shape[1] != w.shape[1]:
        raise DomainError(f"embedding/anchor shape mismatch: {e.shape} vs {w.shape}")
    if y.size != e.shape[0]:
        raise DomainError("one label per embedding required")
    if np.any(y < 0) or np.any(y >= w.shape[0]):
        raise DomainError(f"label out of range for {w.shape[0]} classes")
    if not (0.0 <= margin < math.pi / 2):
        raise DomainError(f"margin must lie in [0, pi/2), got {margin}")
    if scale <= 0:
        raise DomainError("scale must be positive")

    norm_e = np.linalg.norm(e, axis=1)
    norm_w = np.linalg.norm(w, axis=1)
    if np.any(norm_e == 0.0):
        raise DomainError("embedding with zero norm")
    if np.any(norm_w == 0.0):
        raise DomainError("anchor with zero norm")
    unit_e = e / norm_e[:, None]
    unit_w = w / norm_w[:, None]
    raw_cos = unit_e @ unit_w.T
    cos = np.clip(raw_cos, -1.0, 1.0)

    rows = np.arange(e.shape[0])
    cos_y = cos[rows, y]
    theta_y = np.arccos(cos_y)
    margined = np.cos(theta_y + margin)
    logits = scale * cos
    logits[rows, y] = scale * margined
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    losses = -(shifted[rows, y]) + lse

    cache = {
        "unit_e": unit_e,
        "unit_w": unit_w,
        "norm_e": norm_e,
        "norm_w": norm_w,
        "raw_cos": raw_cos,
        "cos": cos,
        "cos_y": cos_y,
        "labels": y,
        "margin": margin,
        "scale": scale,
        "probs": row_softmax(logits),
    }
    return losses, cache


def aam_batch_backward(cache: dict, upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum_b upstream_b * loss_b w.r.t. raw embeddings and raw anchors."""
    up = np.asarray(upstream, dtype=np.float64).ravel()
    probs = cache["probs"]
    y = cache["labels"]
    m = cache["margin"]
    s = cache["scale"]
    rows = np.arange(probs.shape[0])

    d_logits = probs * up[:, None]
    d_logits[rows, y] -= up

    d_cos = s * d_logits
    cos_y = cache["cos_y"]
    sin_y = np.sqrt(np.maximum(1.0 - cos_y * cos_y, 0.0))
    margin_slope = math.cos(m) + math.sin(m) * cos_y / np.maximum(sin_y, _SIN_FLOOR)
    d_cos[rows, y] = s * d_logits[rows, y] * margin_slope
    # the clamp is flat outside [-1, 1]
    d_cos = np.where(np.abs(cache["raw_cos"]) > 1.0, 0.0, d_cos)

    unit_e, unit_w = cache["unit_e"], cache["unit_w"]
    cos = cache["cos"]
    grad_e = (d_cos @ unit_w - np.sum(d_cos * cos, axis=1)[:, None] * unit_e) / cache["norm_e"][:, None]
    grad_w = (d_cos.T @ unit_e - np.sum(d_cos * cos, axis=0)[:, None] * unit_w) / cache["norm_w"][:, None]
    return grad_e, grad_w


def aam_loss(
    embedding: np.ndarray,
    label: int,
    classifier: ClassifierParams,
    margin: float = 0.2,
    scale: float = 30.0,
) -> float:
    """Angular-margin softmax loss of a single embedding against the anchor matrix."""
    losses, _ = aam_batch(np.asarray(embedding, dtype=np.float64)[None], [label], classifier.anchors, margin, scale)
    return float(losses[0])


def aam_backward(
    embedding: np.ndarray,
    label: int,
    classifier: ClassifierParams,
    margin: float = 0.2,
    scale: float = 30.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus analytic gradients w.r.t. the embedding and the anchor matrix."""
    losses, cache = aam_batch(np.asarray(embedding, dtype=np.float64)[None], [label], classifier.anchors, margin, scale)
    grad_e, grad_w = aam_batch_backward(cache, np.ones(1))
    return float(losses[0]), grad_e[0], grad_w


def gated_loss(per_sample_losses, tau: float) -> tuple[float, np.ndarray]:
    """Sum of the losses strictly below tau, with the selection mask.

    tau = +inf disables the gate; tau = 0 selects nothing, which is legal and
    yields zero loss with zero gradient (logged as a warning).
    """
    losses = np.asarray(per_sample_losses, dtype=np.float64).ravel()
    if tau < 0:
        raise DomainError("tau must be >= 0 (use +inf to disable the gate)")
    mask = losses < tau
    if losses.size and not mask.any():
        logger.warning("loss gate at tau=%.4g selected no samples", tau)
    return float(losses[mask].sum()), mask


@dataclass
class GatedTrainerState:
    """Everything a classification epoch mutates, bundled so epochs compose."""

    encoder: EncoderParams
    classifier: ClassifierParams
    optimizer: AdamOptimizer

    @staticmethod
    def fresh(encoder: EncoderParams, classifier: ClassifierParams) -> "GatedTrainerState":
        return GatedTrainerState(
            encoder=encoder,
            classifier=classifier,
            optimizer=AdamOptimizer(encoder.arrays() + [classifier.anchors]),
        )


def train_epoch(
    corpus: Corpus,
    pseudo_labels: np.ndarray,
    state: GatedTrainerState,
    tau: float,
    *,
    crop_len: int,
    batch_size: int,
    lr: float,
    margin: float,
    scale: float,
    rng: np.random.Generator,
    noise_scale: float = 0.0,
    gain_range: tuple[float, float] = (1.0, 1.0),
    epoch: int = 0,
) -> tuple[GatedTrainerState, GateReport]:
    """One pass over the corpus: one random augmented crop per utterance,
    minibatch Adam on gated angular-margin losses.

    Batch losses are normalized by the number of selected samples; a batch
    with an empty selection performs no optimizer step. Augmentation draws
    never depend on the gate, so runs that differ only in tau consume the
    same rng stream. The returned GateReport holds each sample's loss as
    computed during its minibatch.
    """
    labels = np.asarray(pseudo_labels, dtype=np.int64).ravel()
    n = len(corpus)
    if labels.size != n:
        raise DomainError(f"pseudo labels cover {labels.size} utterances, corpus has {n}")
    if labels.max() >= state.classifier.num_classes or labels.min() < 0:
        raise DomainError(
            f"pseudo labels use class {labels.max()} but classifier has {state.classifier.num_classes} classes"
        )
    if batch_size < 1:
        raise ConfigError("batch size must be >= 1")

    order = rng.permutation(n)
    frame_counts = corpus.utterances[0].frames.shape[0]
    if crop_len > frame_counts:
        raise ConfigError(f"crop length {crop_len} exceeds utterance length {frame_counts}")
    starts = rng.integers(0, frame_counts - crop_len + 1, size=n)

    epoch_losses = np.zeros(n)
    epoch_selected = np.zeros(n, dtype=bool)
    encoder, classifier, optimizer = state.encoder, state.classifier, state.optimizer

    for begin in range(0, n, batch_size):
        ids = order[begin : begin + batch_size]
        batch_starts = starts[begin : begin + len(ids)]
        crops = np.stack(
            [corpus.utterances[int(u)].frames[s : s + crop_len] for u, s in zip(ids, batch_starts)]
        )
        if noise_scale > 0.0 or gain_range != (1.0, 1.0):
            crops = crops + rng.normal(0.0, noise_scale, size=crops.shape)
            crops *= rng.uniform(gain_range[0], gain_range[1], size=len(ids))[:, None, None]
        emb, enc_cache = encode_batch(encoder, crops)
        losses, aam_cache = aam_batch(emb, labels[ids], classifier.anchors, margin, scale)
        mask = losses < tau
        epoch_losses[ids] = losses
        epoch_selected[ids] = mask

        count = int(mask.sum())
        if count == 0:
            logger.warning("empty gate selection in minibatch at tau=%.4g; skipping update", tau)
            continue
        upstream = mask.astype(np.float64) / count
        grad_emb, grad_anchors = aam_batch_backward(aam_cache, upstream)
        param_grads = encode_batch_backward(encoder, enc_cache, grad_emb)
        new_arrays = optimizer.step(encoder.arrays() + [classifier.anchors], param_grads + [grad_anchors], lr)
        encoder = EncoderParams.from_arrays(new_arrays[:-1])
        classifier = ClassifierParams(anchors=_renormalize(new_arrays[-1]))

    report = GateReport(
        losses=epoch_losses,
        selected=epoch_selected,
        tau=tau,
        selection_fraction=float(epoch_selected.mean()),
        phase="plain" if math.isinf(tau) else "gated",
        epoch=epoch,
    )
    new_state = GatedTrainerState(encoder=encoder, classifier=classifier, optimizer=optimizer)
    return new_state, report


def check_selection_growth(reports) -> list[bool]:
    """Per-transition flags: did the selected count grow by at least 10%?

    A zero base count satisfies the rule by convention. Advisory only; the
    controller logs violations instead of aborting.
    """
    counts = [int(np.asarray(r.selected).sum()) for r in reports]
    if len(counts) < 2:
        raise DomainError("selection growth needs at least two reports")
    flags = []
    for prev, nxt in zip(counts[:-1], counts[1:]):
        # integer arithmetic keeps the exact-10% boundary exact
        flags.append(prev == 0 or 10 * nxt >= 11 * prev)
    return flags


def _embed_corpus(encoder: EncoderParams, corpus: Corpus) -> np.ndarray:
    emb, _ = encode_batch(encoder, corpus.stacked_frames(), want_cache=False)
    return emb


def _trial_scores(embeddings: np.ndarray, trials) -> np.ndarray:
    a = np.array([t.utt_a for t in trials])
    b = np.array([t.utt_b for t in trials])
    return np.sum(embeddings[a] * embeddings[b], axis=1)


def run_stage2(
    corpus: Corpus,
    encoder: EncoderParams,
    schedule: tuple[IterationRecord, ...],
    *,
    crop_len: int,
    batch_size: int,
    lr: float,
    margin: float,
    scale: float,
    cluster_restarts: int,
    cluster_max_iters: int,
    trials,
    seed: int,
    noise_scale: float = 0.0,
    gain_range: tuple[float, float] = (1.0, 1.0),
) -> tuple[EncoderParams, list[IterationResult]]:
    """Iterative pseudo-label training over a schedule of (tau, epoch budget) records.

    Ground-truth labels are used only to fill evaluation reports after each
    phase; no training decision reads them.
    """
    if not schedule:
        raise ConfigError("stage-2 schedule is empty")
    truth = corpus.truth_labels()
    results: list[IterationResult] = []

    for t, rec in enumerate(schedule, start=1):
        embeddings = _embed_corpus(encoder, corpus)
        km = kmeans(
            embeddings,
            rec.cluster_k,
            max_iters=cluster_max_iters,
            seed=child_seed(seed, "cluster", t),
            restarts=cluster_restarts,
            iteration_index=t,
        )
        labels = km.label_set.labels
        classifier = init_classifier(rec.cluster_k, encoder.embedding_dim, child_seed(seed, "classifier_init", t))
        state = GatedTrainerState.fresh(encoder, classifier)
        rng = child_rng(seed, "stage2", t)

        acc_all = cluster_accuracy(truth, labels)
        nmi_all = nmi(truth, labels)
        rel_mask = reliable_mask(truth, labels)

        gate_reports: list[GateReport] = []
        purity: list[dict] = []
        epoch_no = 0
        for _ in range(rec.epochs_plain):
            epoch_no += 1
            state, report = train_epoch(
                corpus, labels, state, math.inf,
                crop_len=crop_len, batch_size=batch_size, lr=lr,
                margin=margin, scale=scale, rng=rng, epoch=epoch_no,
                noise_scale=noise_scale, gain_range=gain_range,
            )
            gate_reports.append(report)
        for _ in range(rec.epochs_gated):
            epoch_no += 1
            state, report = train_epoch(
                corpus, labels, state, rec.tau,
                crop_len=crop_len, batch_size=batch_size, lr=lr,
                margin=margin, scale=scale, rng=rng, epoch=epoch_no,
                noise_scale=noise_scale, gain_range=gain_range,
            )
            gate_reports.append(report)
            purity.append(_selection_purity(report, truth, labels, rel_mask, acc_all, nmi_all))

        encoder = state.encoder
        final_embeddings = _embed_corpus(encoder, corpus)
        scores = _trial_scores(final_embeddings, trials)
        rate, _ = eer(scores, [tr.is_target for tr in trials])

        if purity:
            selected_nmi = purity[-1]["nmi_selected"] if purity[-1]["nmi_selected"] is not None else nmi_all
            selection_fraction = purity[-1]["selection_fraction"]
        else:
            selected_nmi = nmi_all
            selection_fraction = 1.0
        report = RunReport(
            iteration=t,
            eer=rate,
            nmi=nmi_all,
            cluster_accuracy=acc_all,
            selected_nmi=selected_nmi,
            selection_fraction=selection_fraction,
            wcss=km.label_set.wcss,
            gated_purity=tuple(purity),
        )
        results.append(IterationResult(report=report, gate_reports=tuple(gate_reports), labels=labels, kmeans_result=km))

        gated_only = [r for r in gate_reports if r.phase == "gated"]
        if len(gated_only) >= 2:
            flags = check_selection_growth(gated_only)
            if not all(flags):
                logger.warning("iteration %d: selected count grew <10%% across %d gated epoch transitions", t, flags.count(False))
    return encoder, results


def _selection_purity(report: GateReport, truth, labels, rel_mask, acc_all: float, nmi_all: float) -> dict:
    sel = report.selected
    if sel.any():
        nmi_sel = nmi(truth[sel], labels[sel])
        acc_sel = float(rel_mask[sel].mean())
    else:
        nmi_sel = None
        acc_sel = None
    return {
        "epoch": report.epoch,
        "selection_fraction": report.selection_fraction,
        "nmi_selected": nmi_sel,
        "nmi_all": nmi_all,
        "accuracy_selected": acc_sel,
        "accuracy_all": acc_all,
    }
