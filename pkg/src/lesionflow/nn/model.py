"""Model descriptions, parameter containers, and seeded initialization.

A model is an ordered chain of layer descriptors starting from a (C, H, W)
input and ending in a flat logit vector. Parameters live in a list aligned
with the layer list: conv and dense layers get {"w": ..., "b": ...} entries,
parameter-free layers get empty dicts. All arrays are float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ShapeMismatch

__all__ = [
    "Conv2d",
    "ReLU",
    "MaxPool",
    "Flatten",
    "Dense",
    "LayerSpec",
    "ModelSpec",
    "Params",
    "init_params",
    "default_model_spec",
    "flatten_params",
    "unflatten_params",
    "clone_params",
    "param_count",
]


@dataclass(frozen=True)
class Conv2d:
    """2-D cross-correlation with bias, square kernel, zero padding."""
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    """Window maxima over square windows; stride defaults to the kernel."""
    kernel: int
    stride: int | None = None

    @property
    def effective_stride(self) -> int:
        return self.kernel if self.stride is None else self.stride


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    """Affine map to out_features."""
    out_features: int


LayerSpec = Union[Conv2d, ReLU, MaxPool, Flatten, Dense]

Params = list[dict[str, np.ndarray]]


@dataclass(frozen=True)
class ModelSpec:
    """Input shape (channels, height, width) plus the ordered layer chain."""

    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]

    def feature_shapes(self) -> list[tuple[int, ...]]:
        """Shape after each layer, starting with the input shape.

        Raises ShapeMismatch when the chain does not fit together or a
        spatial dimension collapses below 1.
        """
        shapes: list[tuple[int, ...]] = [tuple(self.input_shape)]
        shape = tuple(self.input_shape)
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, Conv2d):
                if len(shape) != 3:
                    raise ShapeMismatch(f"layer {idx}: conv2d needs a (C, H, W) input, got {shape}")
                c, h, w = shape
                k, s, p = layer.kernel, layer.stride, layer.padding
                h_out = (h + 2 * p - k) // s + 1
                w_out = (w + 2 * p - k) // s + 1
                if k > h + 2 * p or k > w + 2 * p or h_out < 1 or w_out < 1:
                    raise ShapeMismatch(f"layer {idx}: conv2d kernel {k} too large for {shape}")
                shape = (layer.out_channels, h_out, w_out)
            elif isinstance(layer, MaxPool):
                if len(shape) != 3:
                    raise ShapeMismatch(f"layer {idx}: maxpool needs a (C, H, W) input, got {shape}")
                c, h, w = shape
                k, s = layer.kernel, layer.effective_stride
                h_out = (h - k) // s + 1
                w_out = (w - k) // s + 1
                if k > h or k > w or h_out < 1 or w_out < 1:
                    raise ShapeMismatch(f"layer {idx}: maxpool kernel {k} too large for {shape}")
                shape = (c, h_out, w_out)
            elif isinstance(layer, ReLU):
                pass
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, Dense):
                if len(shape) != 1:
                    raise ShapeMismatch(f"layer {idx}: dense needs a flat input, got {shape}")
                shape = (layer.out_features,)
            else:
                raise ShapeMismatch(f"layer {idx}: unknown layer {layer!r}")
            shapes.append(shape)
        return shapes

    @property
    def output_features(self) -> int:
        final = self.feature_shapes()[-1]
        if len(final) != 1:
            raise ShapeMismatch(f"model must end in a flat vector, got {final}")
        return final[0]

    def validate(self, num_classes: int | None = None) -> None:
        """Run the shape chain; optionally require a given logit width."""
        out = self.output_features
        if num_classes is not None and out != num_classes:
            raise ShapeMismatch(f"model emits {out} logits, need {num_classes}")

    def to_json_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            if isinstance(layer, Conv2d):
                layers.append({"type": "conv2d", "out_channels": layer.out_channels,
                               "kernel": layer.kernel, "stride": layer.stride,
                               "padding": layer.padding})
            elif isinstance(layer, ReLU):
                layers.append({"type": "relu"})
            elif isinstance(layer, MaxPool):
                layers.append({"type": "maxpool", "kernel": layer.kernel,
                               "stride": layer.stride})
            elif isinstance(layer, Flatten):
                layers.append({"type": "flatten"})
            elif isinstance(layer, Dense):
                layers.append({"type": "dense", "out_features": layer.out_features})
        return {"input_shape": list(self.input_shape), "layers": layers}

    @staticmethod
    def from_json_dict(d: dict) -> "ModelSpec":
        layers: list[LayerSpec] = []
        for entry in d["layers"]:
            kind = entry["type"]
            if kind == "conv2d":
                layers.append(Conv2d(entry["out_channels"], entry["kernel"],
                                     entry["stride"], entry["padding"]))
            elif kind == "relu":
                layers.append(ReLU())
            elif kind == "maxpool":
                layers.append(MaxPool(entry["kernel"], entry["stride"]))
            elif kind == "flatten":
                layers.append(Flatten())
            elif kind == "dense":
                layers.append(Dense(entry["out_features"]))
            else:
                raise ShapeMismatch(f"unknown layer type {kind!r}")
        return ModelSpec(input_shape=tuple(d["input_shape"]), layers=tuple(layers))


def default_model_spec(input_hw: int = 32, num_classes: int = 8) -> ModelSpec:
    """The stock desk-scale CNN: two conv/relu/pool stages and a dense head.

    Small enough that finite-difference gradient checks stay cheap at any
    input size used in practice.
    """
    return ModelSpec(
        input_shape=(3, input_hw, input_hw),
        layers=(
            Conv2d(out_channels=8, kernel=3, stride=1, padding=1),
            ReLU(),
            MaxPool(kernel=2),
            Conv2d(out_channels=16, kernel=3, stride=1, padding=1),
            ReLU(),
            MaxPool(kernel=2),
            Flatten(),
            Dense(out_features=num_classes),
        ),
    )


def init_params(spec: ModelSpec, seed) -> Params:
    """He-style fan-in initialization from a seeded generator; biases zero."""
    rng = np.random.default_rng(seed)
    shapes = spec.feature_shapes()
    params: Params = []
    for layer, in_shape in zip(spec.layers, shapes[:-1]):
        if isinstance(layer, Conv2d):
            c_in = in_shape[0]
            fan_in = c_in * layer.kernel * layer.kernel
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                           size=(layer.out_channels, c_in, layer.kernel, layer.kernel))
            params.append({"w": w, "b": np.zeros(layer.out_channels)})
        elif isinstance(layer, Dense):
            fan_in = in_shape[0]
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(layer.out_features, fan_in))
            params.append({"w": w, "b": np.zeros(layer.out_features)})
        else:
            params.append({})
    return params


def flatten_params(params: Params) -> np.ndarray:
    """Concatenate every tensor (layer order, weight before bias) into one vector."""
    chunks = []
    for entry in params:
        for key in ("w", "b"):
            if key in entry:
                chunks.append(entry[key].ravel())
    if not chunks:
        return np.zeros(0)
    return np.concatenate(chunks)


def unflatten_params(spec: ModelSpec, flat: np.ndarray) -> Params:
    """Inverse of flatten_params for a given model spec."""
    template = init_params(spec, seed=0)
    flat = np.asarray(flat, dtype=np.float64)
    params: Params = []
    offset = 0
    for entry in template:
        rebuilt = {}
        for key in ("w", "b"):
            if key in entry:
                size = entry[key].size
                rebuilt[key] = flat[offset:offset + size].reshape(entry[key].shape).copy()
                offset += size
        params.append(rebuilt)
    if offset != flat.size:
        raise ShapeMismatch(f"parameter vector has {flat.size} values, model needs {offset}")
    return params


def clone_params(params: Params) -> Params:
    return [{k: v.copy() for k, v in entry.items()} for entry in params]


def param_count(params: Params) -> int:
    return sum(v.size for entry in params for v in entry.values())
