"""Adam optimizer and gradient verification helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError
from .tensor import Tensor


@dataclass
class AdamState:
    """Bias-corrected Adam state for a fixed list of parameters."""

    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor], lr=2e-4, beta1=0.9, beta2=0.999,
                   epsilon=1e-8) -> "AdamState":
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        return cls(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon,
                   m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params])


def adam_step(params: list[Tensor], state: AdamState) -> AdamState:
    """One in-place Adam update using each parameter's ``grad`` buffer.

    Parameters with a missing grad are treated as zero-gradient. Non-finite
    gradients raise NumericsError so the trainer can report the iteration.
    """
    if len(params) != len(state.m):
        raise ValueError(f"state holds {len(state.m)} parameters, got {len(params)}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for i, p in enumerate(params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite gradient in parameter {i} at Adam step {state.step}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(
            p.data.dtype, copy=False)
    return state


def clip_global_norm(params: list[Tensor], max_norm: float) -> float:
    """Scale all grads so their joint L2 norm is at most ``max_norm``."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


def zero_grads(params: list[Tensor]):
    for p in params:
        p.zero_grad()


def finite_diff_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` maps a Tensor to a scalar Tensor and must be deterministic. The
    error at each coordinate is |g_ad - g_fd| / max(1, |g_fd|).
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    probe = Tensor(x.data.copy(), requires_grad=True)
    loss = f(probe)
    loss.backward()
    g_ad = probe.grad.copy() if probe.grad is not None else np.zeros_like(probe.data)

    g_fd = np.zeros_like(x.data)
    flat = x.data.copy().reshape(-1)
    fd_flat = g_fd.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(flat.reshape(x.data.shape))).item()
        flat[i] = orig - eps
        lo = f(Tensor(flat.reshape(x.data.shape))).item()
        flat[i] = orig
        fd_flat[i] = (hi - lo) / (2.0 * eps)

    err = np.abs(g_ad - g_fd) / np.maximum(1.0, np.abs(g_fd))
    return float(err.max()) if err.size else 0.0
