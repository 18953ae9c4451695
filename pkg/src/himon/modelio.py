"""Model file persistence ("MHI1" format).

Byte layout, all little-endian, in order:

    magic            4 bytes  b"MHI1"
    version          u16      currently 1
    flags            u8       bit 0: calibrated (bounds/stats are meaningful)
    window_size      u32
    train_seed       u64
    model_kind       u8       ASCII 'T' or 'C'
    sensor_id        u16 length + UTF-8 bytes
    weight           f64
    normalizer       f64 mean, f64 std, u8 degenerate
    dropout_p        f64
    hi_upper_bound   f64
    burn_in_hi_mean  f64
    burn_in_hi_std   f64
    array count      u16      always 14 for this architecture
    per array:       u16 name length + UTF-8 name tag (e.g. "enc1.w"),
                     u8 ndim, u32 per dimension, then raw f64 data
                     (row-major, little-endian)

Gate ordering inside each LSTM weight array is (input, forget,
cell-candidate, output) along the 4*units axis. load(save(m)) reproduces
every float bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from . import nn
from .component import ComponentModel, Normalizer, SensorSpec
from .errors import ModelFormatError

MAGIC = b"MHI1"
VERSION = 1

_EXPECTED_ARRAYS = 14


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def save_model(path, model: ComponentModel) -> None:
    """Write a component model (fitted or pretrained-only) to path."""
    parts = [MAGIC,
             struct.pack("<HB", VERSION, 1 if model.calibrated else 0),
             struct.pack("<I", model.window_size),
             struct.pack("<Q", model.train_seed & 0xFFFFFFFFFFFFFFFF),
             struct.pack("<B", ord(model.spec.model_kind)),
             _pack_str(model.spec.sensor_id),
             struct.pack("<d", model.spec.weight),
             struct.pack("<ddB", model.normalizer.mean, model.normalizer.std,
                         1 if model.normalizer.degenerate else 0),
             struct.pack("<d", model.dae.dropout_p),
             struct.pack("<ddd", model.hi_upper_bound, model.burn_in_hi_mean,
                         model.burn_in_hi_std)]
    items = model.dae.param_items()
    parts.append(struct.pack("<H", len(items)))
    for name, arr in items:
        parts.append(_pack_str(name))
        parts.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            parts.append(struct.pack("<I", dim))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise ModelFormatError(
                f"truncated model file: wanted {count} bytes at offset {self.pos}, "
                f"file has {len(self.blob)}")
        out = self.blob[self.pos:self.pos + count]
        self.pos += count
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (length,) = self.unpack("<H")
        return self.take(length).decode("utf-8")


def load_model(path, expected_window_size: int | None = None) -> ComponentModel:
    """Read an MHI1 file; validates architecture shapes before returning."""
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())
    if reader.take(4) != MAGIC:
        raise ModelFormatError(f"{path}: bad magic, not an MHI1 model file")
    version, flags = reader.unpack("<HB")
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    (window_size,) = reader.unpack("<I")
    (train_seed,) = reader.unpack("<Q")
    (kind_byte,) = reader.unpack("<B")
    sensor_id = reader.string()
    (weight,) = reader.unpack("<d")
    norm_mean, norm_std, degenerate = reader.unpack("<ddB")
    (dropout_p,) = reader.unpack("<d")
    bound, hi_mean, hi_std = reader.unpack("<ddd")
    (count,) = reader.unpack("<H")
    if count != _EXPECTED_ARRAYS:
        raise ModelFormatError(f"{path}: expected {_EXPECTED_ARRAYS} arrays, got {count}")

    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.string()
        (ndim,) = reader.unpack("<B")
        shape = tuple(reader.unpack("<I")[0] for _ in range(ndim))
        size = int(np.prod(shape)) if shape else 1
        raw = reader.take(size * 8)
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if reader.pos != len(reader.blob):
        raise ModelFormatError(f"{path}: {len(reader.blob) - reader.pos} trailing bytes")

    if expected_window_size is not None and window_size != expected_window_size:
        raise ModelFormatError(
            f"{path}: model window_size {window_size} does not match the "
            f"configured window_size {expected_window_size}")

    template = nn.init_dae_params(window_size, seed=0, dropout_p=dropout_p)
    expected_shapes = {name: a.shape for name, a in template.param_items()}
    if set(arrays.keys()) != set(expected_shapes.keys()):
        raise ModelFormatError(f"{path}: unexpected array tags {sorted(arrays)}")
    for name, arr in arrays.items():
        if arr.shape != expected_shapes[name]:
            raise ModelFormatError(
                f"{path}: array {name} has shape {arr.shape}, "
                f"expected {expected_shapes[name]}")

    dae = nn.replace_arrays(template, arrays)
    try:
        spec = SensorSpec(sensor_id=sensor_id, model_kind=chr(kind_byte), weight=weight)
    except Exception as exc:
        raise ModelFormatError(f"{path}: corrupt sensor spec ({exc})") from None
    return ComponentModel(
        spec=spec, dae=dae,
        normalizer=Normalizer(norm_mean, norm_std, bool(degenerate)),
        window_size=window_size, hi_upper_bound=bound,
        burn_in_hi_mean=hi_mean, burn_in_hi_std=hi_std,
        train_seed=train_seed, calibrated=bool(flags & 1))
