"""Adam with bias correction, plus the reduce-on-plateau learning-rate rule.

Both are pure: adam_step returns fresh parameter and state objects, and the
plateau rule is a function of the full monitored-value history, so replaying
a history always yields the same learning-rate trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Params

__all__ = [
    "AdamState",
    "init_adam_state",
    "adam_step",
    "plateau_reduction_epochs",
    "plateau_lr_sequence",
]


@dataclass
class AdamState:
    """First/second-moment accumulators (parameter-shaped) and the step count."""

    m: Params
    v: Params
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam_state(params: Params, beta1: float = 0.9, beta2: float = 0.999,
                    eps: float = 1e-8) -> AdamState:
    zeros = lambda: [{k: np.zeros_like(v) for k, v in entry.items()} for entry in params]
    return AdamState(m=zeros(), v=zeros(), t=0, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: Params, grads: Params, state: AdamState, lr: float):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    t = state.t + 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    new_params: Params = []
    new_m: Params = []
    new_v: Params = []
    for p_entry, g_entry, m_entry, v_entry in zip(params, grads, state.m, state.v):
        p_out, m_out, v_out = {}, {}, {}
        for key in p_entry:
            g = g_entry[key]
            m = b1 * m_entry[key] + (1.0 - b1) * g
            v = b2 * v_entry[key] + (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** t)
            v_hat = v / (1.0 - b2 ** t)
            p_out[key] = p_entry[key] - lr * m_hat / (np.sqrt(v_hat) + eps)
            m_out[key] = m
            v_out[key] = v
        new_params.append(p_out)
        new_m.append(m_out)
        new_v.append(v_out)
    return new_params, AdamState(m=new_m, v=new_v, t=t, beta1=b1, beta2=b2, eps=eps)


def plateau_reduction_epochs(history, patience: int) -> set[int]:
    """Epochs (1-indexed) at which the plateau rule fires a reduction.

    A reduction fires at epoch t when at least `patience` epochs have passed
    since the later of (a) the epoch of the best value so far (strict
    improvement) and (b) the previous reduction. Each reduction resets the
    wait counter.
    """
    if len(history) == 0:
        raise ValueError("history must be nonempty")
    reductions: set[int] = set()
    best = history[0]
    best_epoch = 1
    last_reduction = 0
    for epoch, value in enumerate(history[1:], start=2):
        if value > best:
            best = value
            best_epoch = epoch
        elif epoch - max(best_epoch, last_reduction) >= patience:
            reductions.add(epoch)
            last_reduction = epoch
    return reductions


def plateau_lr_sequence(history, lr0: float, factor: float, patience: int) -> list[float]:
    """Learning rate in force after each epoch's scheduler update."""
    reductions = plateau_reduction_epochs(history, patience)
    lrs = []
    lr = lr0
    for epoch in range(1, len(history) + 1):
        if epoch in reductions:
            lr *= factor
        lrs.append(lr)
    return lrs
