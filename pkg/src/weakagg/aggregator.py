"""Attention aggregation head.

Turns a bag of per-frame embedding vectors into one valence/arousal pair:
linear projection, per-frame tanh scoring, softmax attention over frames, a
GeLU transform, attention-weighted summation into a context vector, and a
sigmoid output layer. Both the forward pass and the analytic backward pass
run through the kernel backend selected in _backend (numba or numpy).

Forward/backward are pure given immutable params; params may be shared
read-only across threads during evaluation, with a single writer during
training.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ._backend import kernels
from .errors import ShapeError

# flatten_params / unflatten_params pack tensors in this fixed order,
# each row-major; checkpoints depend on it.
FLATTEN_ORDER = ("proj_w", "proj_b", "score_w", "score_b", "gate",
                 "transform_w", "transform_b", "out_w", "out_b")


@dataclass(frozen=True)
class ModelConfig:
    """Layer sizes of the aggregation head.

    out_dim defaults to 2: component 0 is valence, component 1 is arousal.
    """
    embed_dim: int = 256
    proj_dim: int = 128
    score_dim: int = 64
    transform_dim: int = 64
    out_dim: int = 2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{f.name} must be a positive integer, got {v!r}")


@dataclass
class AggregatorParams:
    """All learnable tensors, shapes tied to one ModelConfig.

    Doubles as the gradient container returned by backward().
    """
    proj_w: np.ndarray       # (proj_dim, embed_dim)
    proj_b: np.ndarray       # (proj_dim,)
    score_w: np.ndarray      # (score_dim, proj_dim)
    score_b: np.ndarray      # (score_dim,)
    gate: np.ndarray         # (score_dim,)
    transform_w: np.ndarray  # (transform_dim, score_dim)
    transform_b: np.ndarray  # (transform_dim,)
    out_w: np.ndarray        # (out_dim, transform_dim)
    out_b: np.ndarray        # (out_dim,)


@dataclass
class ForwardCache:
    """Per-frame intermediates retained for the backward pass."""
    frames: np.ndarray         # (J, embed_dim)
    projected: np.ndarray      # (J, proj_dim)
    scores: np.ndarray         # (J, score_dim)
    attn: np.ndarray           # (J,) softmax attention weights
    transform_pre: np.ndarray  # (J, transform_dim) pre-GeLU
    transformed: np.ndarray    # (J, transform_dim)
    context: np.ndarray        # (transform_dim,)
    logits: np.ndarray         # (out_dim,) pre-sigmoid
    output: np.ndarray         # (out_dim,) in (0, 1)


def _shapes(config: ModelConfig):
    return (
        ("proj_w", (config.proj_dim, config.embed_dim)),
        ("proj_b", (config.proj_dim,)),
        ("score_w", (config.score_dim, config.proj_dim)),
        ("score_b", (config.score_dim,)),
        ("gate", (config.score_dim,)),
        ("transform_w", (config.transform_dim, config.score_dim)),
        ("transform_b", (config.transform_dim,)),
        ("out_w", (config.out_dim, config.transform_dim)),
        ("out_b", (config.out_dim,)),
    )


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in _shapes(config))


def init_params(config: ModelConfig, seed: int) -> AggregatorParams:
    """Deterministic initialization.

    Weight matrices are uniform in +-sqrt(6 / (fan_in + fan_out)); the gate
    vector is drawn like a single weight row (fan_out 1); biases start at 0.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in _shapes(config):
        if name == "gate":
            bound = np.sqrt(6.0 / (config.score_dim + 1))
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        elif len(shape) == 2:
            fan_out, fan_in = shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        else:
            tensors[name] = np.zeros(shape)
    return AggregatorParams(**tensors)


def flatten_params(params: AggregatorParams) -> np.ndarray:
    """Concatenate all tensors into one flat vector (FLATTEN_ORDER, row-major)."""
    return np.concatenate([getattr(params, name).ravel() for name in FLATTEN_ORDER])


def unflatten_params(config: ModelConfig, flat) -> AggregatorParams:
    """Inverse of flatten_params for the given config."""
    flat = np.asarray(flat, dtype=np.float64)
    expected = param_count(config)
    if flat.ndim != 1 or flat.size != expected:
        raise ShapeError(f"flat parameter vector has shape {flat.shape}, expected ({expected},)")
    tensors = {}
    pos = 0
    for name, shape in _shapes(config):
        n = int(np.prod(shape))
        tensors[name] = flat[pos:pos + n].reshape(shape)
        pos += n
    return AggregatorParams(**tensors)


def _coerce_frames(frames, embed_dim: int) -> np.ndarray:
    arr = np.ascontiguousarray(frames, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ShapeError(f"expected a non-empty (J, {embed_dim}) frame array, got shape {arr.shape}")
    if arr.shape[1] != embed_dim:
        raise ShapeError(f"frames have dim {arr.shape[1]}, model expects {embed_dim}")
    return arr


def _coerce_target(target, out_dim: int) -> np.ndarray:
    t = np.asarray(getattr(target, "targets", target), dtype=np.float64)
    if t.shape != (out_dim,):
        raise ShapeError(f"target has shape {t.shape}, expected ({out_dim},)")
    return t


def forward(params: AggregatorParams, frames) -> ForwardCache:
    """Run the head on one bag of frames.

    The output is invariant under permuting the frames.
    """
    frames = _coerce_frames(frames, params.proj_w.shape[1])
    out = kernels().forward(
        frames, params.proj_w, params.proj_b, params.score_w, params.score_b,
        params.gate, params.transform_w, params.transform_b,
        params.out_w, params.out_b)
    return ForwardCache(frames, *out)


def loss(output, target) -> float:
    """Mean squared error over the output components."""
    output = np.asarray(output, dtype=np.float64)
    target = _coerce_target(target, output.shape[0])
    diff = output - target
    return float(np.mean(diff * diff))


def backward(params: AggregatorParams, cache: ForwardCache, target) -> AggregatorParams:
    """Exact gradient of loss(forward(params, frames).output, target).

    Returns gradients shaped like AggregatorParams. `cache` must come from
    forward() on the same params.
    """
    target = _coerce_target(target, cache.output.shape[0])
    grads = kernels().backward(
        cache.frames, cache.projected, cache.scores, cache.attn,
        cache.transform_pre, cache.transformed, cache.context, cache.output,
        target, params.score_w, params.gate, params.transform_w, params.out_w)
    return AggregatorParams(*grads)
