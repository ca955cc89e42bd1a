"""Evaluation: minimum-cost assignment, reliable-label masks, normalized
mutual information, equal error rate, and loss-curve splits.

All functions are pure. These are the only code paths that may read
ground-truth speaker labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Assignment:
    """Injective minimum-cost mapping over the smaller side of a cost matrix."""

    mapping: dict[int, int]  # row index -> column index
    total_cost: float


@dataclass(frozen=True)
class RunReport:
    """Per-iteration evaluation summary. All metric fields are fractions in [0, 1]."""

    iteration: int
    eer: float
    nmi: float
    cluster_accuracy: float
    selected_nmi: float
    selection_fraction: float
    wcss: float = 0.0
    gated_purity: tuple[dict, ...] = field(default_factory=tuple)


def hungarian(cost) -> Assignment:
    """Minimum-cost injective assignment of min(rows, cols) pairs.

    Shortest-augmenting-path algorithm with row/column potentials, O(n^2 m).
    Rectangular inputs are handled by solving on the transpose when there are
    more rows than columns.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise DomainError(f"cost must be a nonempty 2-D matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise DomainError("cost matrix contains non-finite entries")

    transposed = cost.shape[0] > cost.shape[1]
    c = cost.T if transposed else cost
    n, m = c.shape

    # potentials and matching, 1-based like the classical formulation
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=np.int64)  # column -> row, 0 = free
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cur = c[i0 - 1, :] - u[i0] - v[1:]
            improve = free & (cur < minv[1:])
            minv[1:][improve] = cur[improve]
            way[1:][improve] = j0
            candidates = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = float(candidates[j1 - 1])
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            match[j0] = match[way[j0]]
            j0 = int(way[j0])

    mapping: dict[int, int] = {}
    for j in range(1, m + 1):
        if match[j]:
            row, col = int(match[j] - 1), j - 1
            if transposed:
                row, col = col, row
            mapping[row] = col
    total = float(sum(cost[r, col] for r, col in mapping.items()))
    return Assignment(mapping=mapping, total_cost=total)


def _contingency(labels_a: np.ndarray, labels_b: np.ndarray):
    vals_a, inv_a = np.unique(labels_a, return_inverse=True)
    vals_b, inv_b = np.unique(labels_b, return_inverse=True)
    counts = np.zeros((vals_a.size, vals_b.size), dtype=np.int64)
    np.add.at(counts, (inv_a, inv_b), 1)
    return vals_a, inv_a, vals_b, inv_b, counts


def reliable_mask(truth_labels, pseudo_labels) -> np.ndarray:
    """True where an utterance's pseudo label maps onto its ground-truth speaker.

    The cluster-to-speaker mapping maximizes total agreement (minimum-cost
    assignment on negated contingency counts). Clusters left unmapped when
    there are more clusters than speakers mark all their members unreliable.
    """
    truth = np.asarray(truth_labels, dtype=np.int64).ravel()
    pseudo = np.asarray(pseudo_labels, dtype=np.int64).ravel()
    if truth.size == 0 or truth.size != pseudo.size:
        raise DomainError(f"label coverage mismatch: {truth.size} truth vs {pseudo.size} pseudo")
    _, inv_t, _, inv_p, counts = _contingency(truth, pseudo)
    # rows = clusters, cols = speakers
    assign = hungarian(-counts.T.astype(np.float64))
    mapped = assign.mapping  # cluster index -> speaker index
    mask = np.zeros(truth.size, dtype=bool)
    for i in range(truth.size):
        cluster = int(inv_p[i])
        mask[i] = cluster in mapped and mapped[cluster] == int(inv_t[i])
    return mask


def cluster_accuracy(truth_labels, pseudo_labels) -> float:
    """Fraction of utterances whose pseudo label is reliable."""
    return float(np.mean(reliable_mask(truth_labels, pseudo_labels)))


def _canonical_partition(labels: np.ndarray) -> np.ndarray:
    _, inv = np.unique(labels, return_inverse=True)
    order = {}
    out = np.empty(labels.size, dtype=np.int64)
    for i, v in enumerate(inv):
        if v not in order:
            order[v] = len(order)
        out[i] = order[v]
    return out


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information, I(A;B) / sqrt(H(A) H(B)), natural logs.

    When either side has zero entropy the ratio is undefined; the result is
    then 1.0 if the two labelings are the same partition and 0.0 otherwise.
    """
    a = np.asarray(labels_a, dtype=np.int64).ravel()
    b = np.asarray(labels_b, dtype=np.int64).ravel()
    if a.size == 0 or a.size != b.size:
        raise DomainError(f"label coverage mismatch: {a.size} vs {b.size}")
    _, _, _, _, counts = _contingency(a, b)
    n = a.size
    joint = counts / n
    pa = joint.sum(axis=1)  # strictly positive: marginals over observed values
    pb = joint.sum(axis=0)
    ha = float(-np.sum(pa * np.log(pa)))
    hb = float(-np.sum(pb * np.log(pb)))
    if ha == 0.0 or hb == 0.0:
        same = np.array_equal(_canonical_partition(a), _canonical_partition(b))
        return 1.0 if same else 0.0
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (np.outer(pa, pb)[nz]))))
    return float(min(1.0, max(0.0, mi / np.sqrt(ha * hb))))


def eer(scores, is_target) -> tuple[float, float]:
    """Equal error rate of a verification score list, with its threshold.

    Sweeps every distinct score plus a sentinel above the maximum. At each
    threshold t, FAR is the fraction of nontarget scores >= t and FRR the
    fraction of target scores < t. FAR - FRR is non-increasing across the
    sweep; the crossing is linearly interpolated between the two bracketing
    sweep points.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    flags = np.asarray(is_target, dtype=bool).ravel()
    if scores.size != flags.size:
        raise DomainError("scores and target flags differ in length")
    tar = np.sort(scores[flags])
    non = np.sort(scores[~flags])
    if tar.size == 0 or non.size == 0:
        raise DomainError("trial list needs at least one target and one nontarget")

    thresholds = np.unique(scores)
    thresholds = np.append(thresholds, thresholds[-1] + 1.0)
    far = (non.size - np.searchsorted(non, thresholds, side="left")) / non.size
    frr = np.searchsorted(tar, thresholds, side="left") / tar.size
    diff = far - frr
    i = int(np.argmax(diff <= 0.0))
    if diff[i] == 0.0:
        return float(far[i]), float(thresholds[i])
    alpha = diff[i - 1] / (diff[i - 1] - diff[i])
    rate = far[i - 1] + alpha * (far[i] - far[i - 1])
    thr = thresholds[i - 1] + alpha * (thresholds[i] - thresholds[i - 1])
    return float(rate), float(thr)


def toy_loss_split(loss_traces: np.ndarray, mask) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Split per-epoch, per-sample loss traces into mean reliable/unreliable curves.

    ``loss_traces`` is (num_epochs, num_samples) with columns indexed by
    utterance id; ``mask`` marks reliable samples. A side with no members is
    reported as None, not as a zero curve.
    """
    traces = np.asarray(loss_traces, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool).ravel()
    if traces.ndim != 2 or traces.shape[1] != mask.size:
        raise DomainError(
            f"trace columns ({traces.shape}) do not cover the mask ({mask.size} samples)"
        )
    reliable = traces[:, mask].mean(axis=1) if mask.any() else None
    unreliable = traces[:, ~mask].mean(axis=1) if (~mask).any() else None
    return reliable, unreliable
