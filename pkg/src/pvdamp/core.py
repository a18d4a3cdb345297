"""Centered unitary 2-D Fourier transforms and the on-disk array format.

Images and k-space data are plain complex ndarrays throughout the package:
a single-coil image is a (H, W) array, multi-coil k-space is (N_c, H, W).
The transforms here act on the trailing two axes, so coil batches pass
straight through.
"""

import json
from pathlib import Path

import numpy as np

__all__ = [
    "PvdampError",
    "ValidationError",
    "ArrayFormatError",
    "fft2c",
    "ifft2c",
    "save_array",
    "load_array",
    "validate_image",
    "validate_kspace",
]


class PvdampError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PvdampError):
    """An input violates a documented contract."""


class ArrayFormatError(ValidationError):
    """An on-disk array file is malformed."""


def validate_image(x, name="image"):
    """Check a dense complex image: 2-D, finite, even dims, H and W >= 8.

    The even-and-at-least-8 requirement keeps dyadic wavelet decompositions
    exact downstream; odd shapes are rejected rather than padded.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {x.shape}")
    h, w = x.shape
    if h < 8 or w < 8 or h % 2 or w % 2:
        raise ValidationError(
            f"{name} dims must be even and >= 8, got {h}x{w}"
        )
    if not np.isfinite(x).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return x


def validate_kspace(y, mask=None, name="kspace"):
    """Check multi-coil k-space data (N_c, H, W); optionally that it is
    exactly zero wherever ``mask`` is zero."""
    y = np.asarray(y)
    if y.ndim != 3 or y.shape[0] < 1:
        raise ValidationError(f"{name} must have shape (N_c, H, W), got {y.shape}")
    if not np.isfinite(y).all():
        raise ValidationError(f"{name} contains non-finite entries")
    if mask is not None:
        off = y[:, ~np.asarray(mask, dtype=bool)]
        if off.size and np.any(off != 0):
            raise ValidationError(f"{name} has nonzero entries outside the mask")
    return y


def _check_finite(x, op):
    if not np.isfinite(x).all():
        raise ValidationError(f"{op}: input contains NaN or Inf")


def fft2c(x):
    """Centered unitary 2-D DFT over the trailing two axes.

    DC lands at index (H//2, W//2); scaling is 1/sqrt(H*W) so the transform
    is exactly unitary and ``ifft2c`` is both adjoint and inverse.
    """
    x = np.asarray(x)
    _check_finite(x, "fft2c")
    shifted = np.fft.ifftshift(x, axes=(-2, -1))
    out = np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(out, axes=(-2, -1))


def ifft2c(y):
    """Inverse (and adjoint) of :func:`fft2c`."""
    y = np.asarray(y)
    _check_finite(y, "ifft2c")
    shifted = np.fft.ifftshift(y, axes=(-2, -1))
    out = np.fft.ifft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(out, axes=(-2, -1))


# On-disk format: <base>.json header {shape, dtype, order} plus <base>.bin raw
# little-endian payload; complex64 is stored as interleaved (re, im) float32.

_DTYPES = {"complex64": np.dtype("<c8"), "float64": np.dtype("<f8")}


def _base_path(path):
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p


def save_array(path, array):
    """Write ``array`` to ``<path>.json`` + ``<path>.bin``.

    Complex input is stored as complex64 and floating input as float64;
    round-trips are bit-identical for arrays already in a storage dtype.
    """
    arr = np.asarray(array)
    if np.iscomplexobj(arr):
        stored = arr.astype("<c8", copy=False)
        dtype_name = "complex64"
    elif np.issubdtype(arr.dtype, np.floating) or np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        stored = arr.astype("<f8", copy=False)
        dtype_name = "float64"
    else:
        raise ValidationError(f"save_array: unsupported dtype {arr.dtype}")
    base = _base_path(path)
    header = {
        "shape": [int(s) for s in stored.shape],
        "dtype": dtype_name,
        "order": "row-major",
    }
    base.with_suffix(".json").write_text(json.dumps(header) + "\n")
    base.with_suffix(".bin").write_bytes(np.ascontiguousarray(stored).tobytes())
    return base


def load_array(path):
    """Read an array written by :func:`save_array`."""
    base = _base_path(path)
    header_path = base.with_suffix(".json")
    payload_path = base.with_suffix(".bin")
    if not header_path.exists() or not payload_path.exists():
        raise ArrayFormatError(f"missing header or payload for {base}")
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise ArrayFormatError(f"unreadable header {header_path}: {exc}") from exc
    for key in ("shape", "dtype", "order"):
        if key not in header:
            raise ArrayFormatError(f"header {header_path} missing key '{key}'")
    if header["order"] != "row-major":
        raise ArrayFormatError(f"unknown order {header['order']!r}")
    dtype = _DTYPES.get(header["dtype"])
    if dtype is None:
        raise ArrayFormatError(f"unknown dtype {header['dtype']!r}")
    shape = tuple(int(s) for s in header["shape"])
    expected = int(np.prod(shape)) * dtype.itemsize if shape else dtype.itemsize
    payload = payload_path.read_bytes()
    if len(payload) < expected:
        raise ArrayFormatError(
            f"truncated payload: {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise ArrayFormatError(
            f"payload length mismatch: {len(payload)} bytes, expected {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
