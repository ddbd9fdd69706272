"""Numba-jitted aggregation kernels, twin of _kernels_np.py.

Differences from the numpy twin are mechanical: erf comes from math.erf in an
explicit loop, and matmul operands are made contiguous because numba's dot
requires it. fastmath stays off so results are run-to-run deterministic.
"""

import math

import numpy as np
from numba import njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _gelu_cdf(x):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            out[i, j] = 0.5 * (1.0 + math.erf(x[i, j] * _INV_SQRT2))
    return out


@njit(cache=True)
def forward(frames, proj_w, proj_b, score_w, score_b, gate,
            transform_w, transform_b, out_w, out_b):
    projected = frames @ np.ascontiguousarray(proj_w.T) + proj_b
    scores = np.tanh(projected @ np.ascontiguousarray(score_w.T) + score_b)
    attn_logits = scores @ gate
    e = np.exp(attn_logits - attn_logits.max())
    attn = e / e.sum()
    transform_pre = scores @ np.ascontiguousarray(transform_w.T) + transform_b
    cdf = _gelu_cdf(transform_pre)
    transformed = transform_pre * cdf
    context = attn @ transformed
    logits = out_w @ context + out_b
    output = 1.0 / (1.0 + np.exp(-logits))
    return projected, scores, attn, transform_pre, transformed, context, logits, output


@njit(cache=True)
def backward(frames, projected, scores, attn, transform_pre, transformed,
             context, output, target, score_w, gate, transform_w, out_w):
    out_dim = output.shape[0]
    d_output = (2.0 / out_dim) * (output - target)
    d_logits = d_output * output * (1.0 - output)

    d_out_w = d_logits.reshape(-1, 1) * context.reshape(1, -1)
    d_out_b = d_logits
    d_context = d_logits @ out_w

    d_attn = transformed @ d_context
    d_transformed = attn.reshape(-1, 1) * d_context.reshape(1, -1)

    cdf = _gelu_cdf(transform_pre)
    pdf = np.exp(-0.5 * transform_pre * transform_pre) * _INV_SQRT_2PI
    d_transform_pre = d_transformed * (cdf + transform_pre * pdf)
    d_transform_w = np.ascontiguousarray(d_transform_pre.T) @ scores
    d_transform_b = d_transform_pre.sum(axis=0)

    d_attn_logits = attn * (d_attn - attn @ d_attn)
    d_gate = d_attn_logits @ scores

    d_scores = d_transform_pre @ transform_w + d_attn_logits.reshape(-1, 1) * gate.reshape(1, -1)
    d_score_pre = d_scores * (1.0 - scores * scores)
    d_score_w = np.ascontiguousarray(d_score_pre.T) @ projected
    d_score_b = d_score_pre.sum(axis=0)

    d_projected = d_score_pre @ score_w
    d_proj_w = np.ascontiguousarray(d_projected.T) @ frames
    d_proj_b = d_projected.sum(axis=0)

    return (d_proj_w, d_proj_b, d_score_w, d_score_b, d_gate,
            d_transform_w, d_transform_b, d_out_w, d_out_b)
