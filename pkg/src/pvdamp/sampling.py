"""Variable-density maps and Bernoulli mask realization.

The density is a center-weighted polynomial profile p_j = clip(c (1 - r_j)^d,
p_min, 1) over the normalized inf-norm distance r_j from the k-space center,
with the calibration block forced to 1 and the scale c solved by bisection so
the expected sample count hits H*W / R. Masks draw every location as an
independent Bernoulli(p_j); a column mode (fully sampled readout, Bernoulli
phase encodes) is available for the Cartesian-readout interpretation.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError

__all__ = [
    "DensityMap",
    "SamplingMask",
    "make_density",
    "draw_mask",
    "realized_acceleration",
]

_SUM_RTOL = 1e-3  # expected sample count must match N/R to 0.1%


@dataclass(frozen=True)
class DensityMap:
    p: np.ndarray  # (H, W) float64, values in (0, 1]
    calib: tuple  # (h_c, w_c) centered fully-sampled block
    target_r: float
    p_min: float = 1e-3
    columns: bool = False

    @property
    def shape(self):
        return self.p.shape

    def validate(self):
        p = self.p
        if p.ndim != 2:
            raise ValidationError(f"density must be 2-D, got {p.shape}")
        if not np.isfinite(p).all():
            raise ValidationError("density contains non-finite entries")
        if np.any(p <= 0) or np.any(p > 1):
            raise ValidationError("density values must lie in (0, 1]")
        if any(self.calib):
            rows, cols = calib_slices(p.shape, self.calib)
            if np.any(p[rows, cols] != 1.0):
                raise ValidationError("calibration block must have p = 1 exactly")
        return self

    @classmethod
    def from_array(cls, p, calib=(0, 0), p_min=None, columns=False):
        """Rebuild a DensityMap around an externally loaded probability map."""
        p = np.asarray(p, dtype=np.float64)
        target_r = p.size / float(p.sum())
        p_min = float(p.min()) if p_min is None else p_min
        return cls(p=p, calib=tuple(calib), target_r=target_r, p_min=p_min,
                   columns=columns).validate()


@dataclass(frozen=True)
class SamplingMask:
    m: np.ndarray  # (H, W) bool
    seed: int
    density: DensityMap = field(repr=False)

    @property
    def shape(self):
        return self.m.shape

    @property
    def n_sampled(self):
        return int(np.count_nonzero(self.m))


def calib_slices(shape, calib):
    """Slices of the centered (h_c, w_c) calibration block."""
    h, w = shape
    h_c, w_c = calib
    if h_c > h or w_c > w or h_c < 0 or w_c < 0:
        raise ValidationError(f"calibration block {calib} does not fit in {shape}")
    r0 = h // 2 - h_c // 2
    c0 = w // 2 - w_c // 2
    return slice(r0, r0 + h_c), slice(c0, c0 + w_c)


def _radius(shape, columns):
    h, w = shape
    rows = np.abs(np.arange(h) - h // 2) / (h // 2)
    cols = np.abs(np.arange(w) - w // 2) / (w // 2)
    if columns:
        return np.broadcast_to(cols, (h, w)).copy()
    return np.maximum(rows[:, None], cols[None, :])


def make_density(shape, r, calib=(0, 0), decay_exponent=4.0, p_min=1e-3,
                 columns=False):
    """Build the sampling probability map for acceleration factor ``r``.

    Raises if the target sample budget N/r cannot be met because the
    calibration block plus the p_min floor already exceed it; the error
    reports the largest feasible acceleration.
    """
    shape = tuple(int(s) for s in shape)
    h, w = shape
    n = h * w
    if r < 1:
        raise ValidationError(f"acceleration factor must be >= 1, got {r}")
    if not 0 < p_min <= 1:
        raise ValidationError(f"p_min must be in (0, 1], got {p_min}")
    if columns and calib[0] not in (0, h):
        calib = (h, calib[1])  # column mode fully samples calibration columns
    rows, cols = calib_slices(shape, calib)

    if r == 1:
        p = np.ones(shape)
        return DensityMap(p=p, calib=tuple(calib), target_r=1.0, p_min=p_min,
                          columns=columns).validate()

    target = n / r
    profile = (1.0 - _radius(shape, columns)) ** decay_exponent

    def total(c):
        p = np.clip(c * profile, p_min, 1.0)
        p[rows, cols] = 1.0
        return p, p.sum()

    _, floor_sum = total(0.0)
    if target < floor_sum:
        r_max = n / floor_sum
        raise ValidationError(
            f"R = {r} infeasible with calib {calib} and p_min {p_min}; "
            f"largest feasible R is {r_max:.3f}"
        )

    lo, hi = 0.0, 1.0
    while total(hi)[1] < target:
        hi *= 2.0
        if hi > 1e9:
            raise ValidationError("density bisection failed to bracket target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p, s = total(mid)
        if abs(s - target) <= 0.5 * _SUM_RTOL * target:
            break
        if s < target:
            lo = mid
        else:
            hi = mid
    p, s = total(0.5 * (lo + hi))
    if abs(s - target) > _SUM_RTOL * target:
        raise ValidationError(
            f"density bisection failed: sum {s:.2f} vs target {target:.2f}"
        )
    return DensityMap(p=p, calib=tuple(calib), target_r=float(r), p_min=p_min,
                      columns=columns).validate()


def draw_mask(density, seed):
    """Realize one Bernoulli mask from ``density`` with a seeded PRNG."""
    density.validate()
    p = density.p
    rng = np.random.default_rng(seed)
    if density.columns:
        cols = rng.random(p.shape[1]) < p[0, :]
        m = np.broadcast_to(cols, p.shape).copy()
    else:
        m = rng.random(p.shape) < p
    return SamplingMask(m=m, seed=int(seed), density=density)


def realized_acceleration(mask):
    """N over the realized number of sampled locations."""
    n_sampled = mask.n_sampled
    if n_sampled == 0:
        raise ValidationError("mask has no sampled locations")
    return mask.m.size / n_sampled
