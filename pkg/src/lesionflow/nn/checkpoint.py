"""Binary checkpoint format.

Layout: 6-byte magic "LFCKPT", one version byte (0x01), a little-endian
u32 giving the JSON header length, the UTF-8 JSON header, then every
parameter tensor flattened in layer order (weights before biases) as
little-endian float64. Round trips are bit exact because nothing is
re-encoded: the same bytes that go out come back in.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import CLASS_NAMES
from ..errors import CorruptCheckpoint
from .model import ModelSpec, Params, flatten_params, param_count, unflatten_params

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint"]

MAGIC = b"LFCKPT"
VERSION = 1


@dataclass
class Checkpoint:
    """A trained model plus the context needed to reuse it."""

    spec: ModelSpec
    params: Params
    epoch: int = 0
    monitor: str = "val_accuracy"
    metric_value: float = 0.0
    class_names: tuple = tuple(CLASS_NAMES)
    seed: int = 0
    weight_mode: str = "min_over_count"
    extra: dict = field(default_factory=dict)

    def header_dict(self) -> dict:
        return {
            "format": "lfckpt",
            "version": VERSION,
            "model": self.spec.to_json_dict(),
            "epoch": int(self.epoch),
            "monitor": self.monitor,
            "metric_value": float(self.metric_value),
            "class_names": list(self.class_names),
            "seed": int(self.seed),
            "weight_mode": self.weight_mode,
            "param_count": int(param_count(self.params)),
            "extra": self.extra,
        }


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    header = json.dumps(ckpt.header_dict(), sort_keys=True).encode("utf-8")
    flat = flatten_params(ckpt.params).astype("<f8")
    if flat.size != param_count(ckpt.params):
        raise CorruptCheckpoint("parameter count disagrees with flattened size")
    blob = MAGIC + bytes([VERSION]) + struct.pack("<I", len(header)) + header + flat.tobytes()
    Path(path).write_bytes(blob)


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 1 + 4:
        raise CorruptCheckpoint("file too short for header")
    if raw[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpoint("bad magic bytes")
    version = raw[len(MAGIC)]
    if version != VERSION:
        raise CorruptCheckpoint(f"unsupported version {version}")
    off = len(MAGIC) + 1
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    if off + hlen > len(raw):
        raise CorruptCheckpoint("header length exceeds file size")
    try:
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"unreadable header: {exc}") from exc
    off += hlen

    try:
        spec = ModelSpec.from_json_dict(header["model"])
        expected = int(header["param_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed header fields: {exc}") from exc

    body = raw[off:]
    if len(body) != expected * 8:
        raise CorruptCheckpoint(
            f"parameter block holds {len(body)} bytes, expected {expected * 8}"
        )
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    params = unflatten_params(spec, flat)
    return Checkpoint(
        spec=spec,
        params=params,
        epoch=int(header.get("epoch", 0)),
        monitor=header.get("monitor", "val_accuracy"),
        metric_value=float(header.get("metric_value", 0.0)),
        class_names=tuple(header.get("class_names", CLASS_NAMES)),
        seed=int(header.get("seed", 0)),
        weight_mode=header.get("weight_mode", "min_over_count"),
        extra=header.get("extra", {}),
    )
