"""AdamW over a flat parameter vector.

Standard update with bias correction; weight decay is decoupled, applied
directly to the parameters and never routed through the moment estimates.
State is single-owner: one optimizer state per training run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0.0 <= self.beta1 < 1.0) or not (0.0 <= self.beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")


@dataclass
class AdamWState:
    step_count: int
    m: np.ndarray  # first moment
    v: np.ndarray  # second moment, elementwise >= 0


def adamw_init(param_count: int) -> AdamWState:
    if param_count < 1:
        raise ShapeError(f"param_count must be >= 1, got {param_count}")
    return AdamWState(0, np.zeros(param_count), np.zeros(param_count))


def adamw_step(theta, grad, state: AdamWState, cfg: AdamWConfig) -> tuple[np.ndarray, AdamWState]:
    """One AdamW update. Returns (new_theta, new_state); inputs are untouched."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise ShapeError(
            f"shape mismatch: theta {theta.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("gradient contains non-finite values")

    t = state.step_count + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    new_theta = theta - cfg.lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta)
    return new_theta, AdamWState(t, m, v)
