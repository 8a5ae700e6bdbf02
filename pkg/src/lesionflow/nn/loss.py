"""Softmax, the class-weighted cross-entropy loss, and its fused gradient.

The loss for a batch is the mean over samples of -w_y * log(p_y), where
p is the softmax output and w_y the weight of the sample's true class.
With one-hot ground truth the full weighted sum over classes collapses to
that single term. Probabilities are floored at 1e-12 inside the log so the
loss stays finite; the floor never binds on healthy runs.
"""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteInput

__all__ = ["softmax", "weighted_ce_loss", "softmax_ce_logit_grad", "LOG_FLOOR"]

LOG_FLOOR = 1e-12


def _weight_array(w) -> np.ndarray:
    # accepts a ClassWeights or a bare array
    return np.asarray(getattr(w, "weights", w), dtype=np.float64)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise NonFiniteInput("logits contain NaN or infinity")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def weighted_ce_loss(probs: np.ndarray, labels, w) -> float:
    """Mean over the batch of -w_y * log(p_y)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    weights = _weight_array(w)
    picked = probs[np.arange(len(labels)), labels]
    return float(np.mean(-weights[labels] * np.log(np.maximum(picked, LOG_FLOOR))))


def softmax_ce_logit_grad(probs: np.ndarray, labels, w) -> np.ndarray:
    """Gradient of the weighted loss with respect to the logits.

    For sample b this is (w_y / B) * (p - onehot(y)): the softmax and the
    log cancel into one clean expression.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    weights = _weight_array(w)
    bsz = len(labels)
    grad = probs.copy()
    grad[np.arange(bsz), labels] -= 1.0
    grad *= (weights[labels] / bsz)[:, None]
    return grad
