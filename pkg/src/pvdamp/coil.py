"""Coil sensitivities: normalization, simulation, the flat-sensitivity
coefficients, PCA coil compression and the multi-coil forward/adjoint pair.

Sensitivities are always normalized so that sum_c |S_c|^2 = 1 at every pixel,
which together with the unitary FFT gives the forward operator unit spectral
norm. The xi map collapses each (coil, wavelet coefficient) pair to one
complex constant: the conjugate sensitivity averaged under the coefficient's
squared analysis atom. For spatially flat coils it reduces exactly to the
conjugate coil constants.
"""

from dataclasses import dataclass

import numpy as np

from .core import ValidationError, fft2c, ifft2c
from .wavelet import SubbandMap, squared_filter_dwt2, subband_map

__all__ = [
    "CoilSet",
    "XiMap",
    "normalize_sensitivities",
    "simulate_sensitivities",
    "compute_xi",
    "coil_compression_basis",
    "pca_compress",
    "forward",
    "adjoint",
]

_NORM_ATOL = 1e-8


@dataclass(frozen=True)
class CoilSet:
    s: np.ndarray  # (N_c, H, W) complex, unit per-pixel sum of squares

    @property
    def n_coils(self):
        return self.s.shape[0]

    @property
    def shape(self):
        return self.s.shape[1:]

    def validate(self):
        if self.s.ndim != 3 or self.s.shape[0] < 1:
            raise ValidationError(f"coil maps must be (N_c, H, W), got {self.s.shape}")
        sos = np.sum(np.abs(self.s) ** 2, axis=0)
        if np.max(np.abs(sos - 1.0)) > _NORM_ATOL:
            raise ValidationError("coil maps are not normalized to unit sum-of-squares")
        return self


@dataclass(frozen=True)
class XiMap:
    xi: np.ndarray  # (N_c, N) complex, one constant per coil per coefficient
    map: SubbandMap

    @property
    def n_coils(self):
        return self.xi.shape[0]


def normalize_sensitivities(s_raw):
    """Divide each pixel's coil vector by its l2 norm."""
    s_raw = np.asarray(s_raw, dtype=np.complex128)
    if s_raw.ndim != 3:
        raise ValidationError(f"expected (N_c, H, W) maps, got {s_raw.shape}")
    norm = np.sqrt(np.sum(np.abs(s_raw) ** 2, axis=0))
    if np.any(norm == 0):
        raise ValidationError(
            "zero-norm pixel in sensitivity maps; mask or pad before normalizing"
        )
    return CoilSet(s=s_raw / norm)


_PHASE_MODES = ((0, 1), (1, 0), (1, 1), (1, -1))


def simulate_sensitivities(shape, n_coils, smoothness=1.25, seed=0, base=0.15,
                           phase_amp=0.25):
    """Smooth synthetic surface-coil maps, deterministic per seed.

    Each coil is a periodic intensity bump (von Mises profile, concentration
    1/smoothness) centered toward the image border, with centers spread
    evenly in angle plus seeded jitter, multiplied by a random smooth phase
    built from the lowest circular harmonics. Periodic smoothness keeps each
    map's spectral support to a few k-space bins, which is the regime the
    per-coefficient aliasing model assumes; ``base`` keeps the pixelwise norm
    bounded away from zero, and larger ``smoothness`` flattens the falloff.
    """
    if n_coils < 1:
        raise ValidationError("n_coils must be >= 1")
    if smoothness <= 0:
        raise ValidationError("smoothness must be positive")
    h, w = (int(s) for s in shape)
    rng = np.random.default_rng(seed)
    kappa = 1.0 / smoothness
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    maps = np.empty((n_coils, h, w), dtype=np.complex128)
    for c in range(n_coils):
        angle = 2 * np.pi * (c + 0.35 * rng.uniform(-1, 1)) / n_coils
        cy = h / 2 + 0.25 * h * np.sin(angle)
        cx = w / 2 + 0.25 * w * np.cos(angle)
        mag = base + np.exp(
            kappa * (np.cos(2 * np.pi * (yy - cy) / h)
                     + np.cos(2 * np.pi * (xx - cx) / w))
            - 2 * kappa
        )
        phase = np.zeros((h, w))
        for ky, kx in _PHASE_MODES:
            phase += rng.normal(scale=phase_amp) * np.cos(
                2 * np.pi * (ky * yy / h + kx * xx / w) + rng.uniform(0, 2 * np.pi)
            )
        maps[c] = mag * np.exp(1j * phase)
    return normalize_sensitivities(maps)


def compute_xi(coils, levels):
    """Flat-sensitivity constants xi[c, j] = <|Psi_j|^2, conj(S_c)>."""
    coils.validate()
    smap = subband_map(coils.shape, levels)
    xi = np.empty((coils.n_coils, smap.n), dtype=np.complex128)
    for c in range(coils.n_coils):
        xi[c] = squared_filter_dwt2(np.conj(coils.s[c]), levels).data
    return XiMap(xi=xi, map=smap)


def coil_compression_basis(calib_kspace, n_virtual):
    """SVD basis of the calibration samples: (N_c, n_virtual) matrix whose
    columns are the top left singular vectors, plus the cumulative retained
    energy fraction per possible n_virtual."""
    calib = np.asarray(calib_kspace)
    if calib.ndim < 2:
        raise ValidationError("calibration data must be (N_c, ...)")
    n_coils = calib.shape[0]
    if not 1 <= n_virtual <= n_coils:
        raise ValidationError(
            f"n_virtual must be in 1..{n_coils}, got {n_virtual}"
        )
    mat = calib.reshape(n_coils, -1)
    u, sing, _ = np.linalg.svd(mat, full_matrices=False)
    energy = np.cumsum(sing**2) / np.sum(sing**2)
    return u[:, :n_virtual], energy


def pca_compress(calib_kspace, full_kspace, n_virtual):
    """Project multi-coil k-space onto the top ``n_virtual`` PCA coils.

    The basis comes from the calibration-region samples only; the projection
    is an isometry onto the retained subspace.
    """
    full = np.asarray(full_kspace)
    basis, _ = coil_compression_basis(calib_kspace, n_virtual)
    return np.einsum("cv,c...->v...", np.conj(basis), full)


def forward(x, coils, mask):
    """Masked coil-weighted spectra: per coil M * fft2c(S_c * x)."""
    x = np.asarray(x)
    m = mask.m if hasattr(mask, "m") else np.asarray(mask)
    if x.shape != coils.shape or m.shape != coils.shape:
        raise ValidationError(
            f"shape mismatch: x {x.shape}, coils {coils.shape}, mask {m.shape}"
        )
    return np.where(m, fft2c(coils.s * x[None]), 0.0)


def adjoint(y, coils):
    """Coil-combined image: sum_c conj(S_c) * ifft2c(y_c)."""
    y = np.asarray(y)
    if y.shape != coils.s.shape:
        raise ValidationError(
            f"shape mismatch: y {y.shape} vs coils {coils.s.shape}"
        )
    return np.sum(np.conj(coils.s) * ifft2c(y), axis=0)
