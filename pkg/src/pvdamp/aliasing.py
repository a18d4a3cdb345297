"""The wavelet-domain aliasing-variance model and its diagnostics.

The per-coefficient variance tau_j is the quadratic form xi_j^H M_b xi_j,
where M_b is one N_c x N_c moment matrix per subband:

    M_b = sum_i P_b(w_i) (m_i / p_i) [ ((1 - p_i) / p_i) z_i z_i^H + Sigma2_i ]

with z_i the masked residual k-space vector across coils at location i. The
reduction to one matrix per band is exact because |Psi_hat|^2 is constant
within a band (atoms in a band are translates of each other), and it is what
keeps the update linear in N and quadratic in N_c.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .core import ValidationError
from .wavelet import SubbandMap

__all__ = [
    "NoiseCov",
    "TauMap",
    "tau_update",
    "empirical_error",
    "normalized_residual",
    "TAU_FLOOR_REL",
]

log = logging.getLogger(__name__)

TAU_FLOOR_REL = 1e-14  # coefficients with tau below this (relative to max) are
# treated as variance-free for normalized residuals and threshold scaling
_CLAMP_ALERT_FRACTION = 1e-3


@dataclass(frozen=True)
class NoiseCov:
    """Measurement-noise covariance across coils.

    ``sigma2`` is either a single Hermitian PSD (N_c, N_c) matrix shared by
    every k-space location, or an (N, N_c, N_c) per-location family indexed
    in flattened centered k-space order.
    """

    sigma2: np.ndarray

    @property
    def n_coils(self):
        return self.sigma2.shape[-1]

    @property
    def per_location(self):
        return self.sigma2.ndim == 3

    @classmethod
    def zero(cls, n_coils):
        return cls(sigma2=np.zeros((n_coils, n_coils), dtype=np.complex128))

    def validate(self):
        s2 = self.sigma2
        if s2.ndim not in (2, 3) or s2.shape[-1] != s2.shape[-2]:
            raise ValidationError(f"noise covariance has bad shape {s2.shape}")
        herm_dev = np.max(np.abs(s2 - np.conj(np.swapaxes(s2, -1, -2))))
        scale = max(np.max(np.abs(s2)), 1.0)
        if herm_dev > 1e-12 * scale:
            raise ValidationError("noise covariance is not Hermitian")
        check = s2 if s2.ndim == 2 else s2[:: max(1, s2.shape[0] // 64)]
        eigs = np.linalg.eigvalsh(check)
        if np.min(eigs) < -1e-12 * scale:
            raise ValidationError("noise covariance has negative eigenvalues")
        return self


@dataclass(frozen=True)
class TauMap:
    tau: np.ndarray  # (N,) float64, >= 0
    map: SubbandMap

    @property
    def mean(self):
        return float(self.tau.mean())

    def band_means(self):
        return self.map.band_means(self.tau)

    def band_summary(self):
        """JSON-ready per-band rows: band id, label, mean variance, size."""
        means = self.band_means()
        return [
            {
                "band_id": band.band_id,
                "label": f"{band.orientation}{band.scale}",
                "mean_tau": float(means[band.band_id]),
                "count": band.count,
            }
            for band in self.map.bands
        ]


def tau_update(z, mask, density, noise, xi, spectra):
    """Predict the aliasing variance of the density-compensated estimate.

    Args:
        z: (N_c, H, W) residual k-space, exactly zero off the mask.
        mask: SamplingMask (or boolean array).
        density: DensityMap (or probability array).
        noise: NoiseCov or None for noiseless acquisition.
        xi: XiMap from :func:`pvdamp.coil.compute_xi`.
        spectra: SubbandSpectra from the same shape and levels.

    Returns:
        TauMap with one nonnegative variance per wavelet coefficient.
    """
    z = np.asarray(z)
    m = mask.m if hasattr(mask, "m") else np.asarray(mask, dtype=bool)
    p = density.p if hasattr(density, "p") else np.asarray(density)
    smap = spectra.map
    if xi.map is not smap and xi.map != smap:
        raise ValidationError("xi and spectra were built from different maps")
    n_coils = z.shape[0]
    if z.shape[1:] != m.shape or z.shape[1:] != p.shape or smap.shape != m.shape:
        raise ValidationError("tau_update: inconsistent shapes")
    if xi.n_coils != n_coils:
        raise ValidationError("xi coil count does not match data")
    off = z[:, ~m]
    if off.size and np.any(off != 0):
        raise ValidationError("z must be exactly zero off the sampled set")

    flat_m = m.ravel()
    idx = np.flatnonzero(flat_m)
    p_s = p.ravel()[idx]
    if np.any(p_s <= 0):
        raise ValidationError("p = 0 at a sampled location")
    spec_s = spectra.power.reshape(smap.n_bands, -1)[:, idx]  # (B, n)
    z_s = z.reshape(n_coils, -1)[:, idx]  # (N_c, n)

    # signal term: weights P_b(w_i) * (1 - p_i) / p_i^2 on sampled locations;
    # one BLAS product per band keeps this the cheap side of the update
    w_sig = spec_s * ((1.0 - p_s) / p_s**2)
    z_h = np.conj(z_s.T)
    moments = np.stack(
        [(z_s * w_sig[b]) @ z_h for b in range(smap.n_bands)]
    )

    if noise is not None:
        noise.validate()
        if noise.n_coils != n_coils:
            raise ValidationError("noise covariance coil count mismatch")
        w_noise = spec_s / p_s
        if noise.per_location:
            if noise.sigma2.shape[0] != smap.n:
                raise ValidationError(
                    "per-location noise family must have one matrix per k-space point"
                )
            moments += np.einsum("bn,ncd->bcd", w_noise, noise.sigma2[idx])
        else:
            moments += w_noise.sum(axis=1)[:, None, None] * noise.sigma2[None]

    # Hermitian quadratic form per coefficient; roundoff can leave a tiny
    # imaginary part and (rarely) a tiny negative real part. The form
    # contracts xi unconjugated on the left: the aliasing of coefficient j is
    # sum_i Psihat_ji (xi_j . q_i), so its second moment is xi^T M conj(xi).
    moments = 0.5 * (moments + np.conj(np.swapaxes(moments, -1, -2)))
    tau = np.empty(smap.n, dtype=np.float64)
    for band in smap.bands:
        xi_b = xi.xi[:, band.start : band.stop]
        tau[band.start : band.stop] = np.einsum(
            "cj,cd,dj->j", xi_b, moments[band.band_id], np.conj(xi_b)
        ).real
    n_clamped = int(np.count_nonzero(tau < 0))
    if n_clamped > _CLAMP_ALERT_FRACTION * smap.n:
        log.warning(
            "tau_update clamped %d of %d coefficients to zero", n_clamped, smap.n
        )
    np.maximum(tau, 0.0, out=tau)
    return TauMap(tau=tau, map=smap)


def empirical_error(r, w_true):
    """Per-coefficient squared error |r_j - w_j|^2 and its per-band means."""
    err = np.abs(np.asarray(r.data) - np.asarray(w_true.data)) ** 2
    return err, r.map.band_means(err)


def normalized_residual(r, w_true, tau, tau_floor_rel=TAU_FLOOR_REL):
    """Residual scaled by the model: eta_j = (r_j - w_j) / sqrt(tau_j).

    Coefficients whose tau is at or below the floor are excluded (returned
    mask False, eta set to 0): fully sampled calibration-dominated
    coefficients can carry essentially zero modeled variance.
    """
    tau_vec = tau.tau if hasattr(tau, "tau") else np.asarray(tau)
    diff = np.asarray(r.data) - np.asarray(w_true.data)
    floor = tau_floor_rel * tau_vec.max() if tau_vec.size else 0.0
    valid = tau_vec > floor
    eta = np.zeros_like(diff)
    eta[valid] = diff[valid] / np.sqrt(tau_vec[valid])
    return eta, valid
