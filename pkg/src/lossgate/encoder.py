"""Trainable embedding network: per-frame MLP, mean pooling over frames,
unit-normalized output.

Forward and backward are analytic; the backward pass includes the Jacobian of
the final normalization, so gradients of any loss on the unit embedding come
out exact. Batched entry points take (B, T, F) stacks and reduce gradients in
a fixed order, which keeps full runs bit-reproducible.

Checkpoint format: magic ``b"LGENCKP1"``, uint32 header length, JSON header
(version, layer_sizes), then each layer's weight matrix and bias vector as
little-endian float64, row-major, in order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NumericError

_CKPT_MAGIC = b"LGENCKP1"
_MIN_POOL_NORM = 1e-12


@dataclass(frozen=True)
class EncoderParams:
    """Affine layer stack; ReLU after every layer except the last."""

    weights: tuple[np.ndarray, ...]  # each (fan_in, fan_out)
    biases: tuple[np.ndarray, ...]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.weights[-1].shape[1]

    def arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved, in the fixed optimizer order."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @staticmethod
    def from_arrays(arrays: list[np.ndarray]) -> "EncoderParams":
        return EncoderParams(weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))


def init_encoder(layer_sizes, seed: int) -> EncoderParams:
    """Random init: weights uniform in +-1/sqrt(fan_in), biases zero. Deterministic in seed."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ConfigError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2]))
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return EncoderParams(weights=tuple(weights), biases=tuple(biases))


def encode_batch(params: EncoderParams, frames: np.ndarray, want_cache: bool = True) -> tuple[np.ndarray, dict | None]:
    """Embed a (B, T, F) stack. Returns (embeddings (B, d), cache for backward).

    Pass ``want_cache=False`` on inference paths: activations are then
    released layer by layer instead of being held for a backward pass.
    """
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 3:
        raise DomainError(f"expected a (B, T, F) stack, got shape {x.shape}")
    if x.shape[2] != params.input_dim:
        raise DomainError(f"feature dim {x.shape[2]} does not match encoder input {params.input_dim}")
    if x.shape[1] < 1:
        raise DomainError("need at least one frame per item")
    b_sz, t_len, f_dim = x.shape
    # frames flattened to (B*T, .) so each layer is a single GEMM
    pre_acts = []
    hidden = [x.reshape(b_sz * t_len, f_dim)]
    cur = hidden[0]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = cur @ w + b
        if want_cache:
            pre_acts.append(a)
        cur = a if i == last else np.maximum(a, 0.0)
        if i != last and want_cache:
            hidden.append(cur)
    pooled = cur.reshape(b_sz, t_len, -1).mean(axis=1)  # (B, d)
    norms = np.linalg.norm(pooled, axis=1)
    if np.any(norms < _MIN_POOL_NORM):
        bad = int(np.argmin(norms))
        raise NumericError(f"degenerate embedding: pooled norm {norms[bad]:.3e} for batch item {bad}")
    emb = pooled / norms[:, None]
    if not want_cache:
        return emb, None
    cache = {"pre_acts": pre_acts, "hidden": hidden, "norms": norms, "emb": emb, "shape": (b_sz, t_len)}
    return emb, cache


def encode_batch_backward(params: EncoderParams, cache: dict, upstream: np.ndarray) -> list[np.ndarray]:
    """Gradients of sum_b <upstream_b, embedding_b> w.r.t. every parameter array.

    Returned list matches ``params.arrays()`` order. The normalization
    Jacobian projects out the radial component, so an upstream gradient
    parallel to the embedding contributes nothing.
    """
    g = np.asarray(upstream, dtype=np.float64)
    emb = cache["emb"]
    if g.shape != emb.shape:
        raise DomainError(f"upstream gradient shape {g.shape} does not match embeddings {emb.shape}")
    norms = cache["norms"]
    b_sz, t_len = cache["shape"]
    radial = np.sum(g * emb, axis=1, keepdims=True)
    d_pooled = (g - radial * emb) / norms[:, None]
    d_cur = np.repeat(d_pooled / t_len, t_len, axis=0)  # (B*T, d), frame share of the pooled grad

    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(params.weights))
    for i in range(len(params.weights) - 1, -1, -1):
        if i != len(params.weights) - 1:
            d_cur = d_cur * (cache["pre_acts"][i] > 0)
        grads[2 * i] = cache["hidden"][i].T @ d_cur
        grads[2 * i + 1] = d_cur.sum(axis=0)
        if i > 0:
            d_cur = d_cur @ params.weights[i].T
    return grads


def encode(params: EncoderParams, frames: np.ndarray) -> np.ndarray:
    """Embed a single (T, F) utterance or crop into a unit vector of length d."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise DomainError(f"expected a (T, F) frame matrix, got shape {frames.shape}")
    emb, _ = encode_batch(params, frames[None])
    return emb[0]


def encode_backward(params: EncoderParams, frames: np.ndarray, upstream: np.ndarray) -> list[np.ndarray]:
    """Parameter gradients of <upstream, encode(params, frames)>, in ``arrays()`` order."""
    frames = np.asarray(frames, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64).ravel()
    if upstream.size != params.embedding_dim:
        raise DomainError(f"upstream gradient length {upstream.size} != embedding dim {params.embedding_dim}")
    _, cache = encode_batch(params, frames[None])
    return encode_batch_backward(params, cache, upstream[None])


def save_encoder(path, params: EncoderParams) -> None:
    header = json.dumps({"version": 1, "layer_sizes": list(params.layer_sizes)}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_encoder(path) -> EncoderParams:
    with open(path, "rb") as fh:
        if fh.read(8) != _CKPT_MAGIC:
            raise DomainError("not an encoder checkpoint (bad magic)")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        sizes = header["layer_sizes"]
        weights = []
        biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(
                np.frombuffer(fh.read(fan_in * fan_out * 8), dtype="<f8").astype(np.float64).reshape(fan_in, fan_out)
            )
            biases.append(np.frombuffer(fh.read(fan_out * 8), dtype="<f8").astype(np.float64))
    return EncoderParams(weights=tuple(weights), biases=tuple(biases))
