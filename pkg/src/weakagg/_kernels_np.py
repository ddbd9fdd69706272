"""Pure-numpy aggregation kernels (fallback backend).

The numba twins in _kernels_nb.py follow this file operation for operation;
keep the two in sync. Both expect C-contiguous float64 inputs: `frames` is
(J, embed_dim), weights are (rows, cols), biases 1-D.

Forward pipeline per bag:
    projected = frames @ proj_w.T + proj_b          linear projection
    scores    = tanh(projected @ score_w.T + score_b)
    attn      = softmax(scores @ gate)              one weight per frame
    transformed = gelu(scores @ transform_w.T + transform_b)
    context   = sum_j attn[j] * transformed[j]
    output    = sigmoid(out_w @ context + out_b)

Loss is the mean squared error over the output components.
"""

import math

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def forward(frames, proj_w, proj_b, score_w, score_b, gate,
            transform_w, transform_b, out_w, out_b):
    projected = frames @ np.ascontiguousarray(proj_w.T) + proj_b
    scores = np.tanh(projected @ np.ascontiguousarray(score_w.T) + score_b)
    attn_logits = scores @ gate
    e = np.exp(attn_logits - attn_logits.max())
    attn = e / e.sum()
    transform_pre = scores @ np.ascontiguousarray(transform_w.T) + transform_b
    cdf = 0.5 * (1.0 + erf(transform_pre * _INV_SQRT2))
    transformed = transform_pre * cdf
    context = attn @ transformed
    logits = out_w @ context + out_b
    output = 1.0 / (1.0 + np.exp(-logits))
    return projected, scores, attn, transform_pre, transformed, context, logits, output


def backward(frames, projected, scores, attn, transform_pre, transformed,
             context, output, target, score_w, gate, transform_w, out_w):
    """Gradients of the mean-squared-error loss w.r.t. every parameter tensor.

    Covers both paths out of the score vectors: into the attention weights
    (softmax Jacobian) and into the transformed features.
    """
    out_dim = output.shape[0]
    d_output = (2.0 / out_dim) * (output - target)
    d_logits = d_output * output * (1.0 - output)

    d_out_w = d_logits.reshape(-1, 1) * context.reshape(1, -1)
    d_out_b = d_logits
    d_context = d_logits @ out_w

    d_attn = transformed @ d_context
    d_transformed = attn.reshape(-1, 1) * d_context.reshape(1, -1)

    cdf = 0.5 * (1.0 + erf(transform_pre * _INV_SQRT2))
    pdf = np.exp(-0.5 * transform_pre * transform_pre) * _INV_SQRT_2PI
    d_transform_pre = d_transformed * (cdf + transform_pre * pdf)
    d_transform_w = np.ascontiguousarray(d_transform_pre.T) @ scores
    d_transform_b = d_transform_pre.sum(axis=0)

    # softmax Jacobian: d_logit_j = a_j * (d_attn_j - sum_i a_i d_attn_i)
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
