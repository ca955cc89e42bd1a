"""Adam optimizer with bias correction, written in a functional style.

``adam_step`` never mutates its inputs; training loops own their states and
reassign. Identical inputs produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class AdamState:
    """Per-parameter-array moments. Shapes always match the parameter."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam(shape, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        first_moment=np.zeros(shape, dtype=np.float64),
        second_moment=np.zeros(shape, dtype=np.float64),
        step_count=0,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(
    params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns (new params, new state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise DomainError(f"gradient shape {grads.shape} does not match parameter shape {params.shape}")
    if params.shape != state.first_moment.shape:
        raise DomainError(f"optimizer state shape {state.first_moment.shape} does not match parameter shape {params.shape}")
    if lr <= 0:
        raise DomainError("learning rate must be positive")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, first_moment=m, second_moment=v, step_count=t)


class AdamOptimizer:
    """Bundles one AdamState per parameter array, stepped in a fixed order."""

    def __init__(self, param_arrays: list[np.ndarray], beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.states = [init_adam(p.shape, beta1, beta2, epsilon) for p in param_arrays]

    def step(self, param_arrays: list[np.ndarray], grad_arrays: list[np.ndarray], lr: float) -> list[np.ndarray]:
        if len(param_arrays) != len(self.states) or len(grad_arrays) != len(self.states):
            raise DomainError("parameter/gradient list length does not match optimizer state")
        out = []
        for i, (p, g) in enumerate(zip(param_arrays, grad_arrays)):
            new_p, self.states[i] = adam_step(p, g, self.states[i], lr)
            out.append(new_p)
        return out
