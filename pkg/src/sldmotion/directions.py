"""Orthogonal latent directions, motion queries, and coefficient editing.

The learnable raw direction matrix is re-orthonormalized on every forward
pass, so gradients flow into the raw parameters while downstream code only
ever sees an orthonormal basis. Latent codes are plain linear combinations
of the basis rows, which makes coefficient edits isometric in latent space.
"""

from __future__ import annotations

import numpy as np

from .numkit import orthonormalize_backward, orthonormalize_fwd


def effective_directions(raw: np.ndarray) -> np.ndarray:
    """Orthonormalized view of the raw direction matrix."""
    directions, _ = effective_directions_fwd(raw)
    return directions


def effective_directions_fwd(raw: np.ndarray):
    return orthonormalize_fwd(raw)


def effective_directions_backward(g_effective: np.ndarray, cache) -> np.ndarray:
    return orthonormalize_backward(g_effective, cache)


def combine(weights: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Latent code as the weighted sum of direction rows; linear in both."""
    weights = np.asarray(weights, dtype=np.float64)
    return weights @ directions


def combine_backward(g_z: np.ndarray, weights: np.ndarray, directions: np.ndarray):
    """Returns (g_weights, g_directions) for z = weights @ directions."""
    return directions @ g_z, np.outer(weights, g_z)


def edit_coefficients(values: np.ndarray, sample_index: int, deltas: np.ndarray) -> np.ndarray:
    """Copy of the coefficient matrix with ``deltas`` added to one sample's row."""
    values = np.asarray(values, dtype=np.float64)
    k = values.shape[0]
    if not 0 <= sample_index < k:
        raise IndexError(f"sample_index {sample_index} out of range for {k} samples")
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != values.shape[1:]:
        raise ValueError(f"deltas shape {deltas.shape} != coefficient width {values.shape[1:]}")
    out = values.copy()
    out[sample_index] = out[sample_index] + deltas
    return out


# Query-to-latent projection: three dense layers over [past_feature; query]
# (or the feature alone), tanh on the hidden layers, residual on the middle
# layer whose widths match, linear zero-initialized output head.

def qlp_forward(params: dict, x: np.ndarray):
    s1 = x @ params["qlp1_w"] + params["qlp1_b"]
    h1 = np.tanh(s1)
    s2 = h1 @ params["qlp2_w"] + params["qlp2_b"]
    t2 = np.tanh(s2)
    h2 = t2 + h1
    w = h2 @ params["qlp3_w"] + params["qlp3_b"]
    return w, (x, h1, t2, h2)


def qlp_backward(params: dict, g_w: np.ndarray, cache, grads: dict) -> np.ndarray:
    """Accumulate parameter gradients into ``grads``; returns gradient w.r.t. x."""
    x, h1, t2, h2 = cache
    grads["qlp3_w"] += np.outer(h2, g_w)
    grads["qlp3_b"] += g_w
    g_h2 = params["qlp3_w"] @ g_w
    g_s2 = g_h2 * (1.0 - t2 * t2)
    grads["qlp2_w"] += np.outer(h1, g_s2)
    grads["qlp2_b"] += g_s2
    g_h1 = params["qlp2_w"] @ g_s2 + g_h2
    g_s1 = g_h1 * (1.0 - h1 * h1)
    grads["qlp1_w"] += np.outer(x, g_s1)
    grads["qlp1_b"] += g_s1
    return params["qlp1_w"] @ g_s1
