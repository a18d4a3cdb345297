"""Synthetic ground-truth phantoms and the acquisition simulator.

Phantoms are complex-valued: overlapping ellipses with a smooth polynomial
phase ("ellipses"), optionally with added blobs and thin curvilinear
structures 1-2 px wide ("blobs_and_vessels") so fine-feature metrics have
something to measure. Acquisition follows y_c = M (F S_c x0 + eps_c) with
complex Gaussian measurement noise of configurable coil covariance.
"""

from dataclasses import dataclass

import numpy as np

from .aliasing import NoiseCov
from .core import ValidationError, fft2c, validate_image

__all__ = ["Phantom", "make_phantom", "make_noise_cov", "acquire"]


@dataclass(frozen=True)
class Phantom:
    x0: np.ndarray  # (H, W) complex, max magnitude exactly 1
    descriptor: dict


def _ellipse(canvas, center, axes, angle, value):
    h, w = canvas.shape
    yy, xx = np.meshgrid(
        (np.arange(h) - (h - 1) / 2) / (h / 2),
        (np.arange(w) - (w - 1) / 2) / (w / 2),
        indexing="ij",
    )
    dy, dx = yy - center[0], xx - center[1]
    ca, sa = np.cos(angle), np.sin(angle)
    u = ca * dx + sa * dy
    v = -sa * dx + ca * dy
    canvas[(u / axes[1]) ** 2 + (v / axes[0]) ** 2 <= 1.0] += value


def _vessel(canvas, rng, value, width):
    """Rasterize a random quadratic Bezier curve of the given pixel width."""
    h, w = canvas.shape
    pts = rng.uniform(0.12, 0.88, size=(3, 2)) * [h, w]
    t = np.linspace(0.0, 1.0, 6 * max(h, w))[:, None]
    curve = ((1 - t) ** 2) * pts[0] + 2 * t * (1 - t) * pts[1] + t**2 * pts[2]
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    hit = np.zeros((h, w), dtype=bool)
    # distance test against the sampled polyline, chunked to bound memory
    for chunk in np.array_split(curve, 8):
        d2 = (yy[None] - chunk[:, 0, None, None]) ** 2 + (
            xx[None] - chunk[:, 1, None, None]
        ) ** 2
        hit |= (d2 <= (width / 2.0) ** 2).any(axis=0)
    canvas[hit] = np.maximum(canvas[hit], value)


def make_phantom(shape, seed=0, kind="ellipses"):
    """Deterministic synthetic ground truth with max |x0| = 1."""
    h, w = (int(s) for s in shape)
    if kind not in ("ellipses", "blobs_and_vessels"):
        raise ValidationError(f"unknown phantom kind {kind!r}")
    rng = np.random.default_rng(seed)
    mag = np.zeros((h, w))
    _ellipse(mag, (0.0, 0.0), (0.78, 0.92), 0.0, 0.9)  # head-like outer hull
    for _ in range(7):
        center = rng.uniform(-0.38, 0.38, size=2)
        axes = rng.uniform(0.08, 0.42, size=2)
        angle = rng.uniform(0.0, np.pi)
        value = rng.uniform(-0.35, 0.6)
        _ellipse(mag, center, axes, angle, value)
    mag = np.abs(mag)
    peak = mag.max()
    if peak == 0:
        raise ValidationError("degenerate phantom (identically zero)")
    mag /= peak
    if kind == "blobs_and_vessels":
        # written onto the normalized base so the fine structures stay
        # near-peak after the final rescale
        yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        for _ in range(3):
            cy, cx = rng.uniform(0.25, 0.75, size=2) * [h, w]
            sigma = rng.uniform(1.5, 3.0)
            mag += rng.uniform(0.15, 0.3) * np.exp(
                -((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2)
            )
        for _ in range(3):
            _vessel(mag, rng, rng.uniform(0.9, 1.0), width=rng.uniform(1.0, 1.6))
        mag /= mag.max()

    u = (np.arange(h) - (h - 1) / 2) / (h / 2)
    v = (np.arange(w) - (w - 1) / 2) / (w / 2)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    c = rng.normal(scale=[0.8, 0.8, 0.8, 0.4, 0.4, 0.4])
    phase = c[0] + c[1] * uu + c[2] * vv + c[3] * uu**2 + c[4] * uu * vv + c[5] * vv**2
    x0 = mag * np.exp(1j * phase)
    descriptor = {"kind": kind, "shape": [h, w], "seed": int(seed)}
    return Phantom(x0=x0, descriptor=descriptor)


def make_noise_cov(n_coils, snr_db, seed, x0, mode="diagonal"):
    """Measurement-noise covariance targeting an acquisition SNR.

    Draws a coil vector v with Re, Im ~ U(-1, 1), rescales every entry to a
    common modulus c chosen so that mean_c ||F S_c x0||^2 / (N c^2) equals
    the requested SNR (with normalized coils, mean_c ||F S_c x0||^2 is
    ||x0||^2 / N_c). The default covariance is the diagonal c^2 I, keeping v
    only as a phase seed; the "correlated" reading v v^H + 0.01 c^2 I is
    available for comparison.
    """
    if snr_db is None or not np.isfinite(snr_db):
        raise ValidationError("snr_db must be a finite value")
    if n_coils < 1:
        raise ValidationError("n_coils must be >= 1")
    x0 = np.asarray(x0)
    signal_energy = float(np.sum(np.abs(x0) ** 2))
    if signal_energy <= 0:
        raise ValidationError("x0 has no energy; SNR is undefined")
    n = x0.size
    snr_linear = 10.0 ** (snr_db / 10.0)
    c2 = signal_energy / (n_coils * n * snr_linear)
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, n_coils) + 1j * rng.uniform(-1.0, 1.0, n_coils)
    v = np.sqrt(c2) * v / np.abs(v)
    if mode == "diagonal":
        sigma2 = c2 * np.eye(n_coils, dtype=np.complex128)
    elif mode == "correlated":
        sigma2 = np.outer(v, np.conj(v)) + 0.01 * c2 * np.eye(n_coils)
    else:
        raise ValidationError(f"unknown noise mode {mode!r}")
    return NoiseCov(sigma2=sigma2).validate()


def _coil_noise(noise, shape, rng):
    n_coils = noise.n_coils
    h, w = shape
    white = (
        rng.standard_normal((n_coils, h, w)) + 1j * rng.standard_normal((n_coils, h, w))
    ) / np.sqrt(2.0)
    if noise.per_location:
        raise ValidationError("per-location noise families are not drawable here")
    # PSD square root via eigendecomposition (covariance of L g is L L^H)
    vals, vecs = np.linalg.eigh(noise.sigma2)
    root = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ np.conj(vecs.T)
    return np.einsum("cd,dhw->chw", root, white)


def acquire(x0, coils, mask, noise=None, seed=0):
    """Simulate one acquisition: per coil, mask * (fft2c(S_c * x0) + eps_c)."""
    x0 = validate_image(np.asarray(x0), "x0")
    m = mask.m if hasattr(mask, "m") else np.asarray(mask, dtype=bool)
    if coils.shape != x0.shape or m.shape != x0.shape:
        raise ValidationError("acquire: inconsistent shapes")
    y0 = fft2c(coils.s * x0[None])
    if noise is not None:
        noise.validate()
        if noise.n_coils != coils.n_coils:
            raise ValidationError("noise covariance coil count mismatch")
        y0 = y0 + _coil_noise(noise, x0.shape, np.random.default_rng(seed))
    return np.where(m, y0, 0.0)
