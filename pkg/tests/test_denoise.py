import numpy as np
import pytest

from pvdamp.core import ValidationError
from pvdamp.denoise import (
    csure,
    soft_threshold,
    subband_divergence,
    sure_denoise,
    tune_thresholds,
)
from pvdamp.wavelet import subband_map

from helpers import random_complex


class TestSoftThreshold:
    def test_zero_threshold_is_identity(self, rng):
        r = random_complex(rng, 64)
        w, div = soft_threshold(r, np.zeros(64))
        assert np.array_equal(w, r)
        assert np.all(div == 1.0)

    def test_known_point(self):
        # |r| = 2, lambda = 1 -> magnitude 1, div = 0.75, any phase
        for theta in (0.0, 0.7, 2.5, -1.2):
            r = np.array([2 * np.exp(1j * theta)])
            w, div = soft_threshold(r, np.array([1.0]))
            assert np.allclose(w, np.exp(1j * theta))
            assert np.allclose(div, 0.75)

    def test_threshold_above_all_kills_everything(self, rng):
        r = random_complex(rng, 32)
        lam = np.full(32, np.abs(r).max() + 1.0)
        w, div = soft_threshold(r, lam)
        assert np.all(w == 0)
        assert np.all(div == 0)

    def test_negative_threshold_rejected(self, rng):
        with pytest.raises(ValidationError):
            soft_threshold(random_complex(rng, 4), np.array([1.0, -1.0, 0.0, 0.0]))

    def test_divergence_matches_finite_differences(self, rng):
        """Closed-form divergence vs central differences of the average of
        dRe f/dRe r and dIm f/dIm r, away from the threshold circle."""
        n = 10_000
        r = random_complex(rng, n) * 2.0
        lam = rng.uniform(0.2, 1.5, n)
        keep = np.abs(np.abs(r) - lam) > 1e-3
        r, lam = r[keep], lam[keep]
        _, div = soft_threshold(r, lam)
        h = 1e-6

        def f(x):
            w, _ = soft_threshold(x, lam)
            return w

        d_re = (f(r + h).real - f(r - h).real) / (2 * h)
        d_im = (f(r + 1j * h).imag - f(r - 1j * h).imag) / (2 * h)
        fd = 0.5 * (d_re + d_im)
        assert np.max(np.abs(div - fd)) <= 1e-5


class TestCsure:
    def test_identity_denoiser_risk_is_total_tau(self, rng):
        smap = subband_map((16, 16), 2)
        r = random_complex(rng, smap.n)
        tau = rng.uniform(0.5, 2.0, smap.n)
        w, div = soft_threshold(r, np.zeros(smap.n))
        total, per_band = csure(w, r, div, tau, smap)
        assert np.isclose(total, tau.sum())
        assert np.allclose(per_band, smap.band_sums(tau))

    def test_kill_all_risk(self, rng):
        smap = subband_map((16, 16), 2)
        r = random_complex(rng, smap.n)
        tau = rng.uniform(0.5, 2.0, smap.n)
        lam = np.full(smap.n, np.abs(r).max() + 1)
        w, div = soft_threshold(r, lam)
        total, _ = csure(w, r, div, tau, smap)
        assert np.isclose(total, np.sum(np.abs(r) ** 2) - tau.sum())

    def test_unbiasedness_monte_carlo(self):
        """E cSURE equals E true squared error for the tuned-threshold family.

        Fixed signal, 2000 complex Gaussian noise draws, thresholds
        lambda_j = sqrt(tau_j); the paired difference must be within 3 SE.
        """
        gen = np.random.default_rng(7)
        smap = subband_map((64, 64), 4)
        n = smap.n
        w0 = np.zeros(n, dtype=complex)
        support = gen.choice(n, size=n // 20, replace=False)
        w0[support] = 4.0 * (gen.standard_normal(len(support)) +
                             1j * gen.standard_normal(len(support)))
        tau = gen.uniform(0.5, 1.5, n)
        lam = np.sqrt(tau)
        draws = 2000
        diffs = np.empty(draws)
        for d in range(draws):
            noise = (gen.standard_normal(n) + 1j * gen.standard_normal(n)) * np.sqrt(tau / 2)
            r = w0 + noise
            w, div = soft_threshold(r, lam)
            est, _ = csure(w, r, div, tau, smap)
            true = float(np.sum(np.abs(w - w0) ** 2))
            diffs[d] = est - true
        se = diffs.std(ddof=1) / np.sqrt(draws)
        assert abs(diffs.mean()) <= 3 * se


class TestTuneThresholds:
    def test_pure_noise_band_no_worse_than_identity(self, rng):
        smap = subband_map((16, 16), 2)
        tau = np.ones(smap.n)
        r = random_complex(rng, smap.n) / np.sqrt(2)  # CN(0, 1)
        ts = tune_thresholds(r, tau, smap)
        lam = ts.lambdas(tau, smap)
        w, div = soft_threshold(r, lam)
        total, _ = csure(w, r, div, tau, smap)
        assert total <= tau.sum() + 1e-9

    def test_noiseless_band_left_alone(self, rng):
        smap = subband_map((16, 16), 2)
        tau = np.zeros(smap.n)
        r = random_complex(rng, smap.n)
        ts = tune_thresholds(r, tau, smap)
        assert np.all(ts.t == 0)
        res = sure_denoise(r, tau, smap)
        assert np.array_equal(res.w_hat, r)

    def test_deterministic_and_band_independent(self, rng):
        smap = subband_map((16, 16), 2)
        tau = rng.uniform(0.5, 1.5, smap.n)
        r = random_complex(rng, smap.n)
        t1 = tune_thresholds(r, tau, smap).t
        t2 = tune_thresholds(r, tau, smap).t
        assert np.array_equal(t1, t2)
        # permuting another band's data leaves this band's threshold unchanged
        band0, band1 = smap.bands[0], smap.bands[1]
        perm = rng.permutation(band1.count)
        r_perm = r.copy()
        r_perm[band1.start : band1.stop] = r[band1.start : band1.stop][perm]
        tau_perm = tau.copy()
        tau_perm[band1.start : band1.stop] = tau[band1.start : band1.stop][perm]
        t3 = tune_thresholds(r_perm, tau_perm, smap).t
        assert t3[band0.band_id] == t1[band0.band_id]

    def test_monotone_improvement_over_endpoints(self, rng):
        smap = subband_map((16, 16), 2)
        tau = rng.uniform(0.2, 2.0, smap.n)
        w0 = np.zeros(smap.n, dtype=complex)
        w0[rng.choice(smap.n, 30, replace=False)] = 5.0
        r = w0 + random_complex(rng, smap.n) * np.sqrt(tau / 2)
        ts = tune_thresholds(r, tau, smap)

        def risk_at(t_vec):
            lam = smap.broadcast(t_vec) * np.sqrt(tau)
            w, div = soft_threshold(r, lam)
            _, per_band = csure(w, r, div, tau, smap)
            return per_band

        chosen = risk_at(ts.t)
        at_zero = risk_at(np.zeros(smap.n_bands))
        t_max = np.array([
            np.max(np.abs(r[b.start : b.stop]) / np.sqrt(tau[b.start : b.stop]))
            for b in smap.bands
        ])
        at_max = risk_at(t_max)
        assert np.all(chosen <= at_zero + 1e-9)
        assert np.all(chosen <= at_max + 1e-9)

    def test_near_oracle_risk(self):
        """SURE-chosen per-band threshold within 5% of the oracle grid
        minimum of the true MSE, averaged over 100 trials."""
        gen = np.random.default_rng(11)
        smap = subband_map((128, 128), 1)
        band = smap.bands[3]  # finest HH, 4096 coefficients
        n = band.count
        ratios = []
        for _ in range(100):
            w0 = np.zeros(smap.n, dtype=complex)
            support = gen.choice(n, size=max(1, n // 20), replace=False)
            w0[band.start + support] = 5.0 * (
                gen.standard_normal(len(support)) + 1j * gen.standard_normal(len(support))
            )
            tau = np.ones(smap.n)
            noise = (gen.standard_normal(smap.n) + 1j * gen.standard_normal(smap.n)) / np.sqrt(2)
            r = w0 + noise
            ts = tune_thresholds(r, tau, smap)
            sl = slice(band.start, band.stop)

            def true_mse(t):
                w, _ = soft_threshold(r[sl], np.full(n, t))
                return float(np.sum(np.abs(w - w0[sl]) ** 2))

            grid = np.linspace(0, np.abs(r[sl]).max(), 200)
            oracle = min(true_mse(t) for t in grid)
            ratios.append(true_mse(ts.t[band.band_id]) / oracle)
        assert np.mean(ratios) <= 1.05

    def test_flat_mode(self, rng):
        smap = subband_map((16, 16), 2)
        tau = np.ones(smap.n)
        r = random_complex(rng, smap.n)
        ts = tune_thresholds(r, tau, smap, mode="flat_per_band")
        lam = ts.lambdas(tau, smap)
        # flat mode: same threshold for every coefficient of a band
        for band in smap.bands:
            assert np.ptp(lam[band.start : band.stop]) == 0.0


class TestSubbandDivergence:
    def test_constants(self, rng):
        smap = subband_map((16, 16), 2)
        alpha, full = subband_divergence(np.ones(smap.n), smap)
        assert np.all(alpha == 1.0) and np.all(full == 1.0)
        alpha, full = subband_divergence(np.zeros(smap.n), smap)
        assert np.all(alpha == 0.0) and np.all(full == 0.0)

    def test_hand_computed_mean(self):
        smap = subband_map((16, 16), 2)
        div = np.zeros(smap.n)
        band = smap.bands[2]
        div[band.start : band.start + 8] = np.array([1, 1, 0, 0, 0.5, 0.5, 0.25, 0.75])
        alpha, _ = subband_divergence(div, smap)
        assert np.isclose(alpha[band.band_id], 4.0 / band.count)
