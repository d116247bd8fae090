"""Adam with bias correction, operating on named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor

__all__ = ["AdamState", "adam_step", "zero_gradients", "OptimError"]


class OptimError(RuntimeError):
    """A gradient was unusable; the step was rejected as a whole."""


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9

    @classmethod
    def for_params(cls, params: dict[str, Tensor], beta1: float = 0.9,
                   beta2: float = 0.98, eps: float = 1e-9) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float) -> None:
    """Apply one bias-corrected Adam update in place.

    A missing gradient counts as zero. Any non-finite gradient rejects the
    whole step before any parameter or moment is touched.
    """
    if lr <= 0.0:
        raise ValueError(f"adam_step: learning rate must be positive, got {lr}")
    grads: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise OptimError(f"adam_step: non-finite gradient for parameter '{name}'")
        grads[name] = g

    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def zero_gradients(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()
