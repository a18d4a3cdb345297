"""Reconstruction quality metrics and the aliasing-model Gaussianity report.

All image metrics compare magnitude images (phase discarded), the standard
CS-MRI reporting convention. NMSE and SSIM are computed over a support mask
of the reference; HFEN filters the full difference image. Windowed statistics
use circular boundaries, consistent with the periodic transforms elsewhere.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError

__all__ = [
    "MetricsReport",
    "SEBounds",
    "BandMoments",
    "GaussianityReport",
    "support_mask",
    "nmse",
    "ssim",
    "hfen",
    "evaluate_pair",
    "gaussianity_stats",
    "se_report",
]

NMSE_FLOOR_DB = -300.0


@dataclass(frozen=True)
class MetricsReport:
    nmse_db: float
    ssim: float
    hfen: float
    mask_fraction: float

    def to_dict(self):
        return {
            "nmse_db": self.nmse_db,
            "ssim": self.ssim,
            "hfen": self.hfen,
            "mask_fraction": self.mask_fraction,
        }


def support_mask(x_ref, fraction=0.05):
    """Pixels whose reference magnitude reaches ``fraction`` of the maximum."""
    mag = np.abs(np.asarray(x_ref))
    return mag >= fraction * mag.max()


def _masked(x, mask):
    if mask is None:
        return np.abs(np.asarray(x))
    return np.abs(np.asarray(x))[np.asarray(mask, dtype=bool)]


def nmse(x_hat, x_ref, mask=None):
    """10 log10(||x_hat - x_ref||^2 / ||x_ref||^2) on masked magnitudes, dB."""
    a = _masked(x_hat, mask)
    b = _masked(x_ref, mask)
    if a.shape != b.shape:
        raise ValidationError("nmse: shape mismatch")
    denom = np.sum(b**2)
    if denom == 0:
        raise ValidationError("nmse: reference is zero on the mask")
    ratio = np.sum((a - b) ** 2) / denom
    if ratio <= 10 ** (NMSE_FLOOR_DB / 10):
        return NMSE_FLOOR_DB
    return float(10.0 * np.log10(ratio))


def _circular_filter(img, kernel):
    h, w = img.shape
    kh, kw = kernel.shape
    padded = np.zeros((h, w))
    padded[:kh, :kw] = kernel
    padded = np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return np.fft.irfft2(np.fft.rfft2(img) * np.fft.rfft2(padded), s=img.shape)


def _gaussian_window(size=11, sigma=1.5):
    ax = np.arange(size) - size // 2
    g = np.exp(-(ax**2) / (2 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(x_hat, x_ref, mask=None, k1=0.01, k2=0.03):
    """Mean structural similarity of magnitude images over the mask.

    Both images are scaled by max |x_ref| so the data range is 1; local
    statistics use an 11x11 Gaussian window with sigma 1.5.
    """
    a = np.abs(np.asarray(x_hat)).astype(np.float64)
    b = np.abs(np.asarray(x_ref)).astype(np.float64)
    if a.shape != b.shape:
        raise ValidationError("ssim: shape mismatch")
    peak = b.max()
    if peak == 0:
        raise ValidationError("ssim: reference is identically zero")
    a, b = a / peak, b / peak
    c1, c2 = k1**2, k2**2
    win = _gaussian_window()
    mu_a = _circular_filter(a, win)
    mu_b = _circular_filter(b, win)
    var_a = _circular_filter(a * a, win) - mu_a**2
    var_b = _circular_filter(b * b, win) - mu_b**2
    cov = _circular_filter(a * b, win) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    smap = num / den
    if mask is not None:
        smap = smap[np.asarray(mask, dtype=bool)]
    return float(np.mean(smap))


def _log_kernel(size=15, sigma=1.5):
    ax = np.arange(size) - size // 2
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    r2 = xx**2 + yy**2
    kern = -(1.0 - r2 / (2 * sigma**2)) * np.exp(-r2 / (2 * sigma**2)) / (
        np.pi * sigma**4
    )
    return kern - kern.mean()  # zero-mean so constants map exactly to zero


def hfen(x_hat, x_ref):
    """High-frequency error norm: ||LoG(|x_hat| - |x_ref|)||_2 / ||x_ref||_2."""
    a = np.abs(np.asarray(x_hat)).astype(np.float64)
    b = np.abs(np.asarray(x_ref)).astype(np.float64)
    if a.shape != b.shape:
        raise ValidationError("hfen: shape mismatch")
    ref_norm = np.linalg.norm(b)
    if ref_norm == 0:
        raise ValidationError("hfen: reference is identically zero")
    filtered = _circular_filter(a - b, _log_kernel())
    return float(np.linalg.norm(filtered) / ref_norm)


def evaluate_pair(x_hat, x_ref, fraction=0.05):
    """NMSE/SSIM over the support mask plus unmasked HFEN, as one report."""
    mask = support_mask(x_ref, fraction)
    return MetricsReport(
        nmse_db=nmse(x_hat, x_ref, mask),
        ssim=ssim(x_hat, x_ref, mask),
        hfen=hfen(x_hat, x_ref),
        mask_fraction=float(np.mean(mask)),
    )


# Gaussianity / state-evolution diagnostics -------------------------------


@dataclass(frozen=True)
class SEBounds:
    """Moment bounds for the normalized residual (exact model: var 1/2 each
    component, zero excess kurtosis)."""

    var_lo: float = 0.45
    var_hi: float = 0.55
    kurt_max: float = 0.3


@dataclass(frozen=True)
class BandMoments:
    label: str
    count: int
    var_re: float
    var_im: float
    kurt_re: float
    kurt_im: float
    mean_re: float
    mean_im: float

    def passes(self, bounds):
        if self.count == 0:
            return False
        return bool(
            bounds.var_lo <= self.var_re <= bounds.var_hi
            and bounds.var_lo <= self.var_im <= bounds.var_hi
            and abs(self.kurt_re) <= bounds.kurt_max
            and abs(self.kurt_im) <= bounds.kurt_max
        )

    def to_dict(self, bounds=None):
        out = {
            "label": self.label,
            "count": self.count,
            "var_re": self.var_re,
            "var_im": self.var_im,
            "kurt_re": self.kurt_re,
            "kurt_im": self.kurt_im,
            "mean_re": self.mean_re,
            "mean_im": self.mean_im,
        }
        if bounds is not None:
            out["passes"] = self.passes(bounds)
        return out


def _moments(label, samples):
    n = samples.size
    if n == 0:
        return BandMoments(label, 0, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan)

    def kurt(v):
        cen = v - v.mean()
        m2 = np.mean(cen**2)
        if m2 == 0:
            return np.nan
        return float(np.mean(cen**4) / m2**2 - 3.0)

    re, im = samples.real, samples.imag
    return BandMoments(
        label=label,
        count=int(n),
        var_re=float(np.var(re)),
        var_im=float(np.var(im)),
        kurt_re=kurt(re),
        kurt_im=kurt(im),
        mean_re=float(re.mean()),
        mean_im=float(im.mean()),
    )


def gaussianity_stats(eta, valid, smap):
    """Moments of the normalized residual, pooled and per band."""
    eta = np.asarray(eta)
    valid = np.asarray(valid, dtype=bool)
    stats = [_moments("all", eta[valid])]
    for band in smap.bands:
        sl = slice(band.start, band.stop)
        stats.append(
            _moments(
                f"{band.orientation}{band.scale}",
                eta[sl][valid[sl]],
            )
        )
    return stats


@dataclass
class GaussianityReport:
    bounds: SEBounds
    iterations: list = field(default_factory=list)  # list of lists of BandMoments

    def add_iteration(self, stats):
        self.iterations.append(stats)

    def pooled_pass_flags(self):
        return [stats[0].passes(self.bounds) for stats in self.iterations]

    def all_pass(self):
        flags = self.pooled_pass_flags()
        return bool(flags) and all(flags)

    def to_dict(self):
        return {
            "bounds": {
                "var_lo": self.bounds.var_lo,
                "var_hi": self.bounds.var_hi,
                "kurt_max": self.bounds.kurt_max,
            },
            "iterations": [
                {
                    "iteration": k,
                    "pooled": stats[0].to_dict(self.bounds),
                    "bands": [s.to_dict(self.bounds) for s in stats[1:]],
                }
                for k, stats in enumerate(self.iterations)
            ],
            "all_pass": self.all_pass(),
        }


def se_report(eta_iterations, smap, bounds=None):
    """Build a Gaussianity report from per-iteration (eta, valid) pairs."""
    report = GaussianityReport(bounds=bounds or SEBounds())
    for eta, valid in eta_iterations:
        report.add_iteration(gaussianity_stats(eta, valid, smap))
    return report
