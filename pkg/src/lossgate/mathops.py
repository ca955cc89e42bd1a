"""Dense numeric kernels shared by every training and evaluation path.

Everything here operates on float64 and is deterministic: no global state,
no hidden rng. All gradients produced elsewhere in the package are checked
against :func:`finite_diff_grad`.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError, NumericError


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    The clamp guards downstream arccos against values like 1 + 1ulp.
    Raises DomainError when either vector has zero norm; the message names
    the offending side.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise DomainError(f"vector lengths differ: {a.size} vs {b.size}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0:
        raise DomainError("left vector has zero norm")
    if nb == 0.0:
        raise DomainError("right vector has zero norm")
    c = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, c))


def log_sum_exp(values) -> float:
    """log(sum(exp(v_i))) computed with a max shift so entries up to +-1e4 do not overflow."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise DomainError("log_sum_exp of an empty sequence")
    m = float(np.max(v))
    return m + float(np.log(np.sum(np.exp(v - m))))


def row_softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-D array, shift-stabilized."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, coordinate by coordinate.

    ``x`` is perturbed in place and restored bit-exactly, so ``f`` may close
    over the same array it receives.
    """
    if h <= 0:
        raise DomainError("step size h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value while differencing coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def max_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Scale-relative deviation between two gradients: max|a-b| / max(scale, 1e-12).

    The denominator is the larger of the two infinity norms, which keeps
    near-zero coordinates from dominating the comparison.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)
