"""Self-supervised contrastive pretraining on augmented segment pairs.

A batch holds N utterances, two augmented views each, laid out as a (2N, d)
embedding matrix where rows 2i and 2i+1 are the two views of utterance i.
For the anchor view (i, j), the loss is

    -log[ exp(cos(e_i1, e_i2)) / (exp(cos(e_i1, e_i2))
          + sum over views (k, l) of other utterances of exp(cos(e_ij, e_kl))) ]

with no temperature. The positive term appears in the denominator, so every
pair loss is nonnegative. Cosines are computed against the raw (possibly
non-unit) rows, which keeps analytic gradients exact for gradient checking.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, augment, sample_segments
from .encoder import EncoderParams, encode_batch, encode_batch_backward
from .errors import ConfigError, DomainError
from .mathops import log_sum_exp
from .optim import AdamOptimizer


def _check_batch(embeddings: np.ndarray) -> tuple[np.ndarray, int]:
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] % 2 != 0:
        raise DomainError(f"expected a (2N, d) embedding matrix, got shape {e.shape}")
    n = e.shape[0] // 2
    if n < 2:
        raise DomainError("contrastive loss needs at least 2 utterances per batch (no negatives otherwise)")
    return e, n


def _cosine_matrix(e: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(e, axis=1)
    if np.any(norms == 0.0):
        raise DomainError("embedding with zero norm in contrastive batch")
    unit = e / norms[:, None]
    return unit @ unit.T, unit, norms


def pair_loss(embeddings: np.ndarray, i: int, j: int) -> float:
    """Contrastive loss of the positive pair of utterance ``i`` with anchor view ``j`` (0 or 1)."""
    e, n = _check_batch(embeddings)
    if not (0 <= i < n) or j not in (0, 1):
        raise DomainError(f"pair index ({i}, {j}) out of range for N={n}")
    cos, _, _ = _cosine_matrix(e)
    pos = cos[2 * i, 2 * i + 1]
    anchor = 2 * i + j
    others = [s for s in range(2 * n) if s // 2 != i]
    terms = np.concatenate(([pos], cos[anchor, others]))
    return float(-pos + log_sum_exp(terms))


def batch_loss(embeddings: np.ndarray) -> float:
    """Mean of all 2N pair losses."""
    e, n = _check_batch(embeddings)
    total = 0.0
    for i in range(n):
        for j in (0, 1):
            total += pair_loss(e, i, j)
    return total / (2 * n)


def batch_backward(embeddings: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch loss and its analytic gradient w.r.t. every raw embedding row."""
    e, n = _check_batch(embeddings)
    cos, unit, norms = _cosine_matrix(e)
    two_n = 2 * n
    scale = 1.0 / two_n
    loss = 0.0
    # d(loss)/d(cos[a, b]) accumulated per ordered index pair
    cos_grad = np.zeros((two_n, two_n))
    idx = np.arange(two_n)
    for i in range(n):
        pos = cos[2 * i, 2 * i + 1]
        others = idx[idx // 2 != i]
        for j in (0, 1):
            anchor = 2 * i + j
            terms = np.concatenate(([pos], cos[anchor, others]))
            lse = log_sum_exp(terms)
            loss += -pos + lse
            soft = np.exp(terms - lse)
            cos_grad[2 * i, 2 * i + 1] += scale * (soft[0] - 1.0)
            cos_grad[anchor, others] += scale * soft[1:]
    loss *= scale

    # chain through d cos(e_a, e_b)/d e_a = (u_b - cos * u_a) / |e_a|
    sym = cos_grad + cos_grad.T
    grad = (sym @ unit - np.sum(sym * cos, axis=1)[:, None] * unit) / norms[:, None]
    return loss, grad


def stage1_lr(epoch_index: int, lr0: float, decay: float = 0.95, every: int = 5) -> float:
    """Learning rate for a 0-indexed epoch: multiplied by ``decay`` after every ``every`` epochs."""
    return lr0 * decay ** (epoch_index // every)


def train_contrastive(
    corpus: Corpus,
    init_params: EncoderParams,
    *,
    batch_size: int,
    epochs: int,
    lr: float,
    segment_len: int,
    noise_scale: float,
    gain_range: tuple[float, float],
    rng: np.random.Generator,
    lr_decay: float = 0.95,
    lr_decay_every: int = 5,
) -> tuple[EncoderParams, list[dict]]:
    """Minibatch Adam on the contrastive batch loss.

    Returns the trained encoder and one history row per epoch:
    ``{"epoch": 1-based, "mean_loss": float, "lr": float}``. Incomplete
    trailing batches are dropped each epoch (a batch needs its full
    complement of negatives).
    """
    if batch_size < 2:
        raise ConfigError("stage-1 batch size must be >= 2")
    if epochs < 0:
        raise ConfigError("epochs must be >= 0")
    if len(corpus) < batch_size:
        raise ConfigError(f"corpus of {len(corpus)} utterances is smaller than one batch of {batch_size}")

    params = init_params
    history: list[dict] = []
    if epochs == 0:
        return params, history

    optimizer = AdamOptimizer(params.arrays())
    n = len(corpus)
    for epoch in range(epochs):
        lr_now = stage1_lr(epoch, lr, lr_decay, lr_decay_every)
        order = rng.permutation(n)
        losses = []
        for start in range(0, n - batch_size + 1, batch_size):
            batch_ids = order[start : start + batch_size]
            views = []
            for uid in batch_ids:
                utt = corpus.utterances[int(uid)]
                seg_a, seg_b = sample_segments(utt, segment_len, rng)
                views.append(augment(seg_a, noise_scale, gain_range, rng))
                views.append(augment(seg_b, noise_scale, gain_range, rng))
            stack = np.stack(views)  # (2N, L, F)
            emb, cache = encode_batch(params, stack)
            loss, emb_grad = batch_backward(emb)
            param_grads = encode_batch_backward(params, cache, emb_grad)
            params = EncoderParams.from_arrays(optimizer.step(params.arrays(), param_grads, lr_now))
            losses.append(loss)
        history.append({"epoch": epoch + 1, "mean_loss": float(np.mean(losses)), "lr": lr_now})
    return params, history
