"""Lloyd's k-means with k-means++ seeding, best-of-R restarts, and the
within-cluster sum-of-squares scan used to pick a cluster count by elbow.

Embeddings are clustered as-is: the encoder already unit-normalizes them, and
Euclidean k-means on unit vectors orders the same way as cosine clustering.
Empty clusters are repaired by reassigning the point farthest from its
current centroid, which keeps k fixed and preserves the per-iteration descent
of the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_WCSS_TIE_EPS = 0.0  # strict comparison; first restart wins ties


@dataclass(frozen=True)
class PseudoLabelSet:
    """Cluster assignment for a whole corpus, one label per utterance id."""

    labels: np.ndarray  # (n,) int64, index == utterance id
    k: int
    wcss: float
    iteration_index: int = 0


@dataclass(frozen=True)
class KMeansResult:
    label_set: PseudoLabelSet
    centroids: np.ndarray  # (k, d)
    wcss_history: tuple[float, ...]  # objective after each Lloyd iteration of the winning restart
    converged: bool


def _pairwise_sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d2 = np.sum(x * x, axis=1)[:, None] + np.sum(c * c, axis=1)[None, :] - 2.0 * (x @ c.T)
    return np.maximum(d2, 0.0)


def _objective(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    # direct differences: exact zero when every point sits on its centroid
    diff = x - centroids[labels]
    return float(np.sum(diff * diff))


def _kmeanspp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining mass is on already-chosen locations; pick any unchosen index
            remaining = np.setdiff1d(np.arange(n), np.array(chosen))
            nxt = int(remaining[int(rng.integers(remaining.size))])
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return x[np.array(chosen)].copy()


def _lloyd(x: np.ndarray, k: int, max_iters: int, rng: np.random.Generator):
    n = x.shape[0]
    centroids = _kmeanspp_init(x, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    converged = False
    for _ in range(max_iters):
        d2 = _pairwise_sq_dists(x, centroids)
        new_labels = np.argmin(d2, axis=1).astype(np.int64)

        counts = np.bincount(new_labels, minlength=k)
        if np.any(counts == 0):
            assigned_d2 = d2[np.arange(n), new_labels].copy()
            for empty in np.flatnonzero(counts == 0):
                # farthest point whose cluster can spare a member
                donors = counts[new_labels] >= 2
                victim = int(np.argmax(np.where(donors, assigned_d2, -np.inf)))
                counts[new_labels[victim]] -= 1
                new_labels[victim] = empty
                counts[empty] += 1
                assigned_d2[victim] = -np.inf

        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for j in range(k):
            centroids[j] = x[labels == j].mean(axis=0)
        history.append(_objective(x, centroids, labels))
    wcss = _objective(x, centroids, labels)
    return labels, centroids, wcss, history, converged


def kmeans(
    embeddings: np.ndarray,
    k: int,
    max_iters: int = 100,
    seed: int = 0,
    restarts: int = 5,
    iteration_index: int = 0,
) -> KMeansResult:
    """Best of ``restarts`` seeded k-means++ runs, judged by final objective.

    Deterministic in (embeddings, k, seed). Raises ConfigError when k is not
    in [1, n] or the iteration budget is empty.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigError(f"expected a nonempty (n, d) embedding matrix, got shape {x.shape}")
    n = x.shape[0]
    if not (1 <= k <= n):
        raise ConfigError(f"cluster count k={k} must lie in [1, {n}]")
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")

    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 4, r]))
        labels, centroids, wcss, history, converged = _lloyd(x, k, max_iters, rng)
        if best is None or wcss < best[2] - _WCSS_TIE_EPS:
            best = (labels, centroids, wcss, history, converged)
    labels, centroids, wcss, history, converged = best
    label_set = PseudoLabelSet(labels=labels, k=k, wcss=wcss, iteration_index=iteration_index)
    return KMeansResult(
        label_set=label_set,
        centroids=centroids,
        wcss_history=tuple(history),
        converged=converged,
    )


def elbow_scan(
    embeddings: np.ndarray,
    k_candidates,
    max_iters: int = 100,
    seed: int = 0,
    restarts: int = 5,
) -> list[tuple[int, float]]:
    """One k-means run per candidate k under a shared seed policy; returns (k, wcss) pairs."""
    out = []
    for k in k_candidates:
        res = kmeans(embeddings, int(k), max_iters=max_iters, seed=seed, restarts=restarts)
        out.append((int(k), res.label_set.wcss))
    return out


def save_labels(path, label_set: PseudoLabelSet) -> None:
    with open(path, "w") as fh:
        for uid, lab in enumerate(label_set.labels):
            fh.write(f"{uid} {int(lab)}\n")


def load_labels(path) -> np.ndarray:
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            uid, lab = line.split()
            pairs.append((int(uid), int(lab)))
    labels = np.zeros(len(pairs), dtype=np.int64)
    for uid, lab in pairs:
        labels[uid] = lab
    return labels
