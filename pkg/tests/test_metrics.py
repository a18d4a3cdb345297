import numpy as np

from pvdamp.metrics import (
    SEBounds,
    evaluate_pair,
    gaussianity_stats,
    hfen,
    nmse,
    se_report,
    ssim,
    support_mask,
)
from pvdamp.wavelet import subband_map

from helpers import random_complex


class TestSupportMask:
    def test_constant_image_all_ones(self):
        assert support_mask(np.ones((8, 8))).all()

    def test_single_bright_pixel(self):
        x = np.full((8, 8), 0.1)
        x[3, 3] = 1.0
        mask = support_mask(x, fraction=0.5)
        assert mask.sum() == 1 and mask[3, 3]

    def test_zero_fraction_keeps_everything(self, rng):
        x = rng.random((8, 8))
        assert support_mask(x, fraction=0.0).all()


class TestNmse:
    def test_identical_images_hit_floor(self, rng):
        x = random_complex(rng, (16, 16))
        assert nmse(x, x) <= -300

    def test_zero_estimate_is_zero_db(self, rng):
        x = random_complex(rng, (16, 16))
        assert abs(nmse(np.zeros_like(x), x)) < 1e-12

    def test_hand_instance(self):
        x_ref = np.array([[3.0, 4.0], [0.0, 0.0]])
        x_hat = np.array([[3.0, 2.0], [0.0, 0.0]])
        # magnitudes: error 2^2 = 4, reference energy 25
        pad_ref = np.zeros((8, 8)); pad_ref[:2, :2] = x_ref
        pad_hat = np.zeros((8, 8)); pad_hat[:2, :2] = x_hat
        assert np.isclose(nmse(pad_hat, pad_ref), 10 * np.log10(4 / 25))

    def test_mask_restricts_comparison(self, rng):
        x = rng.random((16, 16)) + 0.5
        y = x.copy()
        y[0, 0] += 10.0  # corrupted pixel outside the mask
        mask = np.ones((16, 16), dtype=bool)
        mask[0, 0] = False
        assert nmse(y, x, mask) <= -300


class TestSsim:
    def test_identical_images(self, rng):
        x = random_complex(rng, (32, 32))
        assert ssim(x, x) >= 1 - 1e-9

    def test_negated_image_same_magnitude(self, rng):
        x = random_complex(rng, (32, 32))
        assert ssim(-x, x) >= 1 - 1e-9

    def test_independent_noise_scores_low(self, rng):
        a = np.abs(random_complex(rng, (64, 64)))
        b = np.abs(random_complex(rng, (64, 64)))
        assert ssim(a, b) < 0.3

    def test_bounded_by_one_for_positive_images(self, rng):
        a = rng.random((32, 32)) + 0.1
        b = a + 0.05 * rng.random((32, 32))
        value = ssim(a, b)
        assert 0.0 < value <= 1.0


class TestHfen:
    def test_identical_images(self, rng):
        x = random_complex(rng, (32, 32))
        assert hfen(x, x) == 0.0

    def test_constant_offset_vanishes(self, rng):
        x = rng.random((32, 32)) + 1.0
        y = x + 0.37
        assert hfen(y, x) <= 1e-10

    def test_impulse_difference_equals_kernel_norm_ratio(self):
        from pvdamp.metrics import _log_kernel

        x_ref = np.full((32, 32), 2.0)
        x_hat = x_ref.copy()
        x_hat[10, 12] += 1.0
        expected = np.linalg.norm(_log_kernel()) / np.linalg.norm(x_ref)
        assert np.isclose(hfen(x_hat, x_ref), expected, rtol=1e-10)


def test_evaluate_pair_self_comparison(rng):
    x = random_complex(rng, (32, 32))
    report = evaluate_pair(x, x)
    assert report.nmse_db <= -300
    assert report.ssim >= 1 - 1e-9
    assert report.hfen == 0.0
    assert 0 < report.mask_fraction <= 1


class TestGaussianityReport:
    def test_exact_gaussian_passes_default_bounds(self):
        """CN(0, 1) samples at N = 4096 pass the default bounds in at least
        99% of 1000 seeded trials (bounds sit 4-4.5 sigma out)."""
        smap = subband_map((64, 64), 4)
        bounds = SEBounds()
        passes = 0
        trials = 1000
        for seed in range(trials):
            gen = np.random.default_rng(seed)
            eta = (gen.standard_normal(smap.n) + 1j * gen.standard_normal(smap.n)) / np.sqrt(2)
            stats = gaussianity_stats(eta, np.ones(smap.n, dtype=bool), smap)
            passes += stats[0].passes(bounds)
        assert passes >= 0.99 * trials

    def test_uniform_samples_fail_kurtosis(self):
        smap = subband_map((64, 64), 4)
        gen = np.random.default_rng(0)
        half = np.sqrt(3 * 0.5)  # uniform with variance 1/2, excess kurtosis -1.2
        eta = gen.uniform(-half, half, smap.n) + 1j * gen.uniform(-half, half, smap.n)
        stats = gaussianity_stats(eta, np.ones(smap.n, dtype=bool), smap)
        assert abs(stats[0].kurt_re + 1.2) < 0.15
        assert not stats[0].passes(SEBounds())

    def test_zero_residual_fails_variance(self):
        smap = subband_map((16, 16), 2)
        stats = gaussianity_stats(
            np.zeros(smap.n, dtype=complex), np.ones(smap.n, dtype=bool), smap
        )
        assert not stats[0].passes(SEBounds())

    def test_report_structure(self, rng):
        smap = subband_map((16, 16), 2)
        eta = random_complex(rng, smap.n) / np.sqrt(2)
        valid = np.ones(smap.n, dtype=bool)
        report = se_report([(eta, valid), (eta, valid)], smap)
        as_dict = report.to_dict()
        assert len(as_dict["iterations"]) == 2
        assert len(as_dict["iterations"][0]["bands"]) == smap.n_bands
        counts = [b["count"] for b in as_dict["iterations"][0]["bands"]]
        assert sum(counts) == smap.n
