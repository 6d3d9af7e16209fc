"""Canonical JSON encoding for persisted artifacts.

Store files must be byte-reproducible across rebuilds, so floats are
quantized to 10 significant decimal digits before encoding and non-finite
values are rejected (absent cells etc. must already be None). Scalars go
through the same numeric procedure as arrays, so either route yields the
same bytes.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

SIG_DIGITS = 10


class CanonList(list):
    """A list whose whole subtree is already canonical.

    Producers that quantize arrays in bulk wrap the result so dumps() can
    skip the per-element walk. Only hand these out for data that really
    is canonical: ints, quantized finite floats, strings, None, or nested
    plain lists thereof.
    """


def quantize_array(arr: np.ndarray) -> np.ndarray:
    """Round every element to SIG_DIGITS significant decimal digits."""
    a = np.asarray(arr, dtype=np.float64).copy()
    if not np.isfinite(a).all():
        raise ValueError("non-finite float in JSON payload")
    nz = np.nonzero(a.reshape(-1))[0]
    if nz.size:
        flat = a.reshape(-1)
        x = flat[nz]
        dec = (SIG_DIGITS - 1) - np.floor(np.log10(np.abs(x))).astype(np.int64)
        # one scaling keeps the result the nearest double to the decimal
        # rounding; the split path only covers decades where 10**dec would
        # overflow, at the price of one extra rounding step
        extreme = np.abs(dec) > 280
        scale = np.power(10.0, np.where(extreme, 0, dec))
        q = np.rint(x * scale) / scale
        if extreme.any():
            xe, de = x[extreme], dec[extreme]
            half = de // 2
            s1 = np.power(10.0, half)
            s2 = np.power(10.0, de - half)
            q[extreme] = np.rint((xe * s1) * s2) / s1 / s2
        flat[nz] = q
    return a


def quantize(value: float) -> float:
    return float(quantize_array(np.array([value]))[0])


def quantized_list(arr, absent=None) -> CanonList:
    """Quantized float list with None where `absent` is set."""
    a = np.asarray(arr, dtype=np.float64)
    if absent is None:
        return CanonList(quantize_array(a).tolist())
    mask = np.asarray(absent, dtype=bool)
    out = quantize_array(np.where(mask, 0.0, a)).astype(object)
    out[mask] = None
    return CanonList(out.tolist())


def int_list(arr, absent=None) -> CanonList:
    """Integer list with None where `absent` is set."""
    a = np.asarray(arr)
    if absent is None:
        return CanonList(a.tolist())
    out = a.astype(object)
    out[np.asarray(absent, dtype=bool)] = None
    return CanonList(out.tolist())


def _canon(obj):
    if isinstance(obj, CanonList):
        return obj
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        # int/None and pure-float sequences dominate store volume; handle
        # them in bulk instead of recursing element by element
        if all(type(v) is int or v is None for v in obj):
            return list(obj)
        if all(type(v) is float for v in obj):
            return quantize_array(np.array(obj, dtype=np.float64)).tolist()
        return [_canon(v) for v in obj]
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        return quantize(obj)
    if isinstance(obj, (int, str)):
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return _canon(obj.item())
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(_canon(obj), ensure_ascii=True, allow_nan=False,
                      separators=(",", ":"))


def dump_bytes(obj) -> bytes:
    return dumps(obj).encode("ascii")


def loads(text: str | bytes):
    return json.loads(text)


def load_path(path):
    with open(path, "rb") as f:
        return json.load(f)


def atomic_write(path, data: bytes) -> None:
    """Write so readers never observe a partial file."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write(path, dump_bytes(obj))
