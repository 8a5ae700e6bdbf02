"""Finite-difference verification of the analytic gradients.

Central differences of the full loss with respect to individual parameters
are the independent referee for the backward pass: the two computations
share nothing but the forward code. Relative error uses a symmetric
denominator with a small floor, so exactly-zero gradient pairs (dead ReLU
paths) compare clean.
"""

from __future__ import annotations

import numpy as np

from .layers import backward, forward
from .loss import softmax, weighted_ce_loss
from .model import ModelSpec, Params, clone_params

__all__ = ["grad_check"]

_REL_FLOOR = 1e-8


def grad_check(
    spec: ModelSpec,
    params: Params,
    batch,
    labels,
    w,
    h: float = 1e-6,
    samples_per_tensor: int = 25,
    seed: int = 0,
    gradient_fn=None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks up to `samples_per_tensor` randomly chosen components of every
    parameter tensor. `gradient_fn` replaces the analytic pass when given
    (useful for planting a deliberate bug and confirming the check sees it).
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    if gradient_fn is None:
        gradient_fn = backward
    grads = gradient_fn(spec, params, batch, labels, w)

    def loss_at(p: Params) -> float:
        return weighted_ce_loss(softmax(forward(spec, p, batch)), labels, w)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for layer_idx, entry in enumerate(params):
        for key, tensor in entry.items():
            size = tensor.size
            if size <= samples_per_tensor:
                picks = np.arange(size)
            else:
                picks = rng.choice(size, size=samples_per_tensor, replace=False)
            for flat_idx in picks:
                idx = np.unravel_index(flat_idx, tensor.shape)
                perturbed = clone_params(params)
                perturbed[layer_idx][key][idx] += h
                plus = loss_at(perturbed)
                perturbed[layer_idx][key][idx] -= 2.0 * h
                minus = loss_at(perturbed)
                numeric = (plus - minus) / (2.0 * h)
                analytic = grads[layer_idx][key][idx]
                rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), _REL_FLOOR)
                worst = max(worst, rel)
    return worst
