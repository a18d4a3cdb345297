"""Complex soft thresholding with per-subband SURE-tuned thresholds.

Thresholds are parameterized per band as lambda_j = t_b * sqrt(tau_j)
("tau_scaled", the default): dividing through by sqrt(tau_j) whitens the
within-band aliasing, so a single scalar per band matches the unbiased-risk
model even when tau varies inside the band. A flat absolute threshold per
band ("flat_per_band") is kept for comparison.

The risk estimate for a complex observation r = w0 + CN(0, diag(tau)) is

    risk = ||f(r) - r||^2 + sum_j tau_j (2 div_j - 1)

with div the averaged Wirtinger-style derivative of the denoiser; its
expectation equals the true squared error, so minimizing it per band tunes
the thresholds without ground truth.
"""

from dataclasses import dataclass

import numpy as np

from .aliasing import TAU_FLOOR_REL
from .core import ValidationError

__all__ = [
    "ThresholdSet",
    "DenoiseResult",
    "soft_threshold",
    "csure",
    "tune_thresholds",
    "subband_divergence",
    "sure_denoise",
]

_GOLDEN_ITERS = 50
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ThresholdSet:
    t: np.ndarray  # one tuned scalar per band
    mode: str = "tau_scaled"  # or "flat_per_band"

    def lambdas(self, tau, smap):
        """Expand to per-coefficient thresholds."""
        per_band = smap.broadcast(self.t)
        if self.mode == "tau_scaled":
            return per_band * np.sqrt(np.maximum(tau, 0.0))
        if self.mode == "flat_per_band":
            return per_band
        raise ValidationError(f"unknown threshold mode {self.mode!r}")


@dataclass
class DenoiseResult:
    w_hat: np.ndarray  # denoised coefficients
    div: np.ndarray  # per-coefficient divergence, in [0, 1]
    alpha: np.ndarray  # per-band mean divergence
    csure_band: np.ndarray  # per-band risk at the chosen thresholds
    thresholds: ThresholdSet


def soft_threshold(r, lam):
    """Complex soft thresholding and its closed-form divergence.

    w_j = r_j max(1 - lam_j/|r_j|, 0); div_j = 1 - lam_j/(2 |r_j|) where
    |r_j| > lam_j and 0 otherwise (the |r| = lam circle has measure zero).
    """
    r = np.asarray(r)
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), r.shape)
    if np.any(lam < 0):
        raise ValidationError("thresholds must be nonnegative")
    mag = np.abs(r)
    above = mag > lam
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(above, 1.0 - lam / np.where(mag > 0, mag, 1.0), 0.0)
        div = np.where(above, 1.0 - lam / (2.0 * np.where(mag > 0, mag, 1.0)), 0.0)
    return r * shrink, div


def csure(w_hat, r, div, tau, smap):
    """Unbiased risk estimate, totaled and per band."""
    w_hat, r, div = np.asarray(w_hat), np.asarray(r), np.asarray(div)
    tau = np.asarray(tau)
    if not (w_hat.shape == r.shape == div.shape == tau.shape == (smap.n,)):
        raise ValidationError("csure: length mismatch")
    contrib = np.abs(w_hat - r) ** 2 + tau * (2.0 * div - 1.0)
    per_band = smap.band_sums(contrib)
    return float(per_band.sum()), per_band


def _band_risk(mag, mag2, tau_b, scale_b, t):
    lam = t * scale_b
    above = mag > lam
    with np.errstate(divide="ignore", invalid="ignore"):
        resid2 = np.where(above, lam**2, mag2)
        div = np.where(above, 1.0 - lam / (2.0 * np.where(mag > 0, mag, 1.0)), 0.0)
    return float(np.sum(resid2 + tau_b * (2.0 * div - 1.0)))


def _golden_minimize(fun, lo, hi, iters=_GOLDEN_ITERS):
    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = fun(x2)
    return 0.5 * (a + b)


def tune_thresholds(r, tau, smap, mode="tau_scaled"):
    """Per-band scalars minimizing the per-band risk estimate.

    Each band is searched independently by golden section on [0, t_max]
    (t_max covers the threshold that zeroes the whole band), and the result
    is kept only if it beats the identity denoiser t = 0.
    """
    r = np.asarray(r)
    tau = np.asarray(tau)
    floor = TAU_FLOOR_REL * tau.max() if tau.size else 0.0
    t = np.zeros(smap.n_bands)
    for band in smap.bands:
        sl = slice(band.start, band.stop)
        r_b, tau_b = r[sl], tau[sl]
        live = tau_b > floor
        mag = np.abs(r_b)
        if mode == "tau_scaled":
            if not np.any(live):
                continue  # noiseless band: identity
            scale_b = np.sqrt(np.maximum(tau_b, 0.0))
            t_max = float(np.max(mag[live] / scale_b[live]))
        elif mode == "flat_per_band":
            if not np.any(live):
                continue
            scale_b = np.ones_like(tau_b)
            t_max = float(np.max(mag))
        else:
            raise ValidationError(f"unknown threshold mode {mode!r}")
        if t_max <= 0:
            continue
        mag2 = mag**2
        risk = lambda tt: _band_risk(mag, mag2, tau_b, scale_b, tt)
        t_star = _golden_minimize(risk, 0.0, t_max)
        if risk(t_star) < risk(0.0):
            t[band.band_id] = t_star
    return ThresholdSet(t=t, mode=mode)


def subband_divergence(div, smap):
    """Band-averaged divergence and its per-coefficient broadcast."""
    alpha_band = smap.band_means(np.asarray(div))
    return alpha_band, smap.broadcast(alpha_band)


def sure_denoise(r, tau, smap, mode="tau_scaled"):
    """Tune thresholds, apply them, and collect the per-band diagnostics."""
    thresholds = tune_thresholds(r, tau, smap, mode=mode)
    lam = thresholds.lambdas(tau, smap)
    w_hat, div = soft_threshold(r, lam)
    alpha_band, _ = subband_divergence(div, smap)
    _, csure_band = csure(w_hat, r, div, np.maximum(tau, 0.0), smap)
    return DenoiseResult(
        w_hat=w_hat,
        div=div,
        alpha=alpha_band,
        csure_band=csure_band,
        thresholds=thresholds,
    )
