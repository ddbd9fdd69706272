"""Minimal dense linear-algebra and activation layer.

Everything works on 1-D float64 vectors and 2-D float64 matrices. All
functions are pure and deterministic: identical inputs give bitwise-identical
outputs, so they are safe to call from any number of threads.

`fd_gradient` is the central-difference gradient oracle used to check the
analytic backward pass; it only ever evaluates the objective, never any
analytic derivative.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy.special import erf

from .errors import NumericError, ShapeError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ActivationKind(enum.Enum):
    TANH = "tanh"
    GELU = "gelu"
    SIGMOID = "sigmoid"


def as_vector(x) -> np.ndarray:
    """Coerce to a 1-D float64 array; reject anything else."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    return v


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-D float64 array; reject anything else."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def affine(w, b, x) -> np.ndarray:
    """b + w @ x with explicit shape checking.

    w is (rows, cols), b is (rows,), x is (cols,).
    """
    w = as_matrix(w)
    b = as_vector(b)
    x = as_vector(x)
    if w.shape[1] != x.shape[0]:
        raise ShapeError(f"matrix shape {w.shape} does not accept input of shape {x.shape}")
    if w.shape[0] != b.shape[0]:
        raise ShapeError(f"matrix shape {w.shape} does not match bias of shape {b.shape}")
    return b + w @ x


def tanh(x) -> np.ndarray:
    return np.tanh(as_vector(x))


def tanh_grad(x) -> np.ndarray:
    t = np.tanh(as_vector(x))
    return 1.0 - t * t


def sigmoid(x) -> np.ndarray:
    """Logistic sigmoid, branch form so large |x| never overflows."""
    x = as_vector(x)
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(x) -> np.ndarray:
    s = sigmoid(x)
    return s * (1.0 - s)


def gelu(x) -> np.ndarray:
    """Exact GeLU x * Phi(x), error-function form (not the tanh approximation)."""
    x = as_vector(x)
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x) -> np.ndarray:
    """d/dx [x * Phi(x)] = Phi(x) + x * phi(x)."""
    x = as_vector(x)
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return cdf + x * pdf


_ACTIVATE = {
    ActivationKind.TANH: tanh,
    ActivationKind.GELU: gelu,
    ActivationKind.SIGMOID: sigmoid,
}

_ACTIVATE_GRAD = {
    ActivationKind.TANH: tanh_grad,
    ActivationKind.GELU: gelu_grad,
    ActivationKind.SIGMOID: sigmoid_grad,
}


def activate(kind: ActivationKind, x) -> np.ndarray:
    """Elementwise activation of `kind` applied to vector x."""
    try:
        fn = _ACTIVATE[kind]
    except (KeyError, TypeError):
        raise ValueError(f"unknown activation kind {kind!r}") from None
    return fn(x)


def activate_grad(kind: ActivationKind, x) -> np.ndarray:
    """Elementwise derivative of the activation of `kind` at x."""
    try:
        fn = _ACTIVATE_GRAD[kind]
    except (KeyError, TypeError):
        raise ValueError(f"unknown activation kind {kind!r}") from None
    return fn(x)


def softmax(scores) -> np.ndarray:
    """Softmax over a score vector.

    Subtracts the max score before exponentiation, so the result is invariant
    under adding a constant to all scores and never overflows.
    """
    s = as_vector(scores)
    e = np.exp(s - s.max())
    return e / e.sum()


def fd_gradient(objective, params, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar objective at `params`.

    (f(theta + step*e_i) - f(theta - step*e_i)) / (2*step) per coordinate.
    Independent of any analytic derivative code by construction.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    theta = as_vector(params).copy()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + step
        f_plus = float(objective(theta))
        theta[i] = orig - step
        f_minus = float(objective(theta))
        theta[i] = orig
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(f"objective returned a non-finite value near coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad
