"""Vectorized forward and backward passes for every layer type.

Batches are NCHW float64 arrays. conv2d is plain cross-correlation with
bias (no kernel flip), maxpool takes window maxima (gradient goes to the
first maximum in each window), dense is an affine map. The backward pass
returns exact analytic gradients; the finite-difference harness in
gradcheck.py is the independent referee.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch
from .loss import softmax, softmax_ce_logit_grad, weighted_ce_loss
from .model import Conv2d, Dense, Flatten, MaxPool, ModelSpec, Params, ReLU

__all__ = [
    "forward",
    "forward_with_caches",
    "backward",
    "backward_through_layers",
    "loss_and_grad",
]


def _conv_forward(x, w, b, stride, padding):
    bsz, c_in, h, w_in = x.shape
    c_out, _, k, _ = w.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    # (B, C_in, H_out, W_out, k, k) -> (B, H_out, W_out, C_in*k*k)
    h_out, w_out = windows.shape[2], windows.shape[3]
    patches = windows.transpose(0, 2, 3, 1, 4, 5).reshape(bsz, h_out, w_out, -1)
    out = patches @ w.reshape(c_out, -1).T + b
    return out.transpose(0, 3, 1, 2), (patches, x.shape, stride, padding, k)


def _conv_backward(dout, w, cache):
    patches, padded_shape, stride, padding, k = cache
    c_out = w.shape[0]
    dmat = dout.transpose(0, 2, 3, 1)  # (B, H_out, W_out, C_out)
    dw = np.einsum("bhwo,bhwk->ok", dmat, patches).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    dpatches = dmat @ w.reshape(c_out, -1)  # (B, H_out, W_out, C_in*k*k)
    bsz, h_out, w_out = dpatches.shape[:3]
    c_in = padded_shape[1]
    dpatches = dpatches.reshape(bsz, h_out, w_out, c_in, k, k)
    dx_pad = np.zeros(padded_shape)
    for kh in range(k):
        for kw in range(k):
            dx_pad[:, :, kh:kh + stride * h_out:stride, kw:kw + stride * w_out:stride] += \
                dpatches[:, :, :, :, kh, kw].transpose(0, 3, 1, 2)
    if padding:
        dx_pad = dx_pad[:, :, padding:-padding, padding:-padding]
    return dx_pad, dw, db


def _maxpool_forward(x, k, stride):
    windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = windows.reshape(*windows.shape[:4], k * k)
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return out, (x.shape, argmax, k, stride)


def _maxpool_backward(dout, cache):
    in_shape, argmax, k, stride = cache
    bsz, c, h_out, w_out = dout.shape
    dx = np.zeros(in_shape)
    bb = np.arange(bsz)[:, None, None, None]
    cc = np.arange(c)[None, :, None, None]
    rows = np.arange(h_out)[None, None, :, None] * stride + argmax // k
    cols = np.arange(w_out)[None, None, None, :] * stride + argmax % k
    np.add.at(dx, (bb, cc, rows, cols), dout)
    return dx


def forward_with_caches(spec: ModelSpec, params: Params, batch: np.ndarray):
    """Run the chain, keeping everything the backward pass needs."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != len(spec.input_shape) + 1 or x.shape[1:] != tuple(spec.input_shape):
        raise ShapeMismatch(
            f"batch shape {x.shape} does not match model input (B, {', '.join(map(str, spec.input_shape))})"
        )
    caches = []
    for idx, (layer, entry) in enumerate(zip(spec.layers, params)):
        if isinstance(layer, Conv2d):
            if entry["w"].shape[1] != x.shape[1]:
                raise ShapeMismatch(f"layer {idx}: conv weights expect {entry['w'].shape[1]} channels")
            x, cache = _conv_forward(x, entry["w"], entry["b"], layer.stride, layer.padding)
            caches.append(cache)
        elif isinstance(layer, ReLU):
            caches.append(x > 0)
            x = np.maximum(x, 0.0)
        elif isinstance(layer, MaxPool):
            x, cache = _maxpool_forward(x, layer.kernel, layer.effective_stride)
            caches.append(cache)
        elif isinstance(layer, Flatten):
            caches.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, Dense):
            if x.ndim != 2 or x.shape[1] != entry["w"].shape[1]:
                raise ShapeMismatch(f"layer {idx}: dense expects {entry['w'].shape[1]} features, got {x.shape}")
            caches.append(x)
            x = x @ entry["w"].T + entry["b"]
        else:
            raise ShapeMismatch(f"layer {idx}: unknown layer {layer!r}")
    return x, caches


def forward(spec: ModelSpec, params: Params, batch: np.ndarray) -> np.ndarray:
    """Logits for a batch: shape (B, output_features)."""
    logits, _ = forward_with_caches(spec, params, batch)
    return logits


def backward_through_layers(spec: ModelSpec, params: Params, caches, dlogits: np.ndarray) -> Params:
    """Propagate a logit gradient back through the chain.

    Returns gradients in the same layout as the parameters.
    """
    grads: Params = [{} for _ in spec.layers]
    dx = dlogits
    for idx in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[idx]
        cache = caches[idx]
        if isinstance(layer, Conv2d):
            dx, dw, db = _conv_backward(dx, params[idx]["w"], cache)
            grads[idx] = {"w": dw, "b": db}
        elif isinstance(layer, ReLU):
            dx = dx * cache
        elif isinstance(layer, MaxPool):
            dx = _maxpool_backward(dx, cache)
        elif isinstance(layer, Flatten):
            dx = dx.reshape(cache)
        elif isinstance(layer, Dense):
            x = cache
            grads[idx] = {"w": dx.T @ x, "b": dx.sum(axis=0)}
            dx = dx @ params[idx]["w"]
    return grads


def backward(spec: ModelSpec, params: Params, batch, labels, w) -> Params:
    """Exact gradient of the weighted cross-entropy with respect to every parameter."""
    _, grads = loss_and_grad(spec, params, batch, labels, w)
    return grads


def loss_and_grad(spec: ModelSpec, params: Params, batch, labels, w):
    """One combined pass: (scalar loss, Params-shaped gradients)."""
    logits, caches = forward_with_caches(spec, params, batch)
    probs = softmax(logits)
    loss = weighted_ce_loss(probs, labels, w)
    dlogits = softmax_ce_logit_grad(probs, labels, w)
    return loss, backward_through_layers(spec, params, caches, dlogits)
