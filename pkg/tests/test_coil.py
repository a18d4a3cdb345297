import numpy as np
import pytest

from pvdamp.coil import (
    CoilSet,
    adjoint,
    coil_compression_basis,
    compute_xi,
    forward,
    normalize_sensitivities,
    pca_compress,
    simulate_sensitivities,
)
from pvdamp.core import ValidationError, fft2c
from pvdamp.sampling import draw_mask, make_density

from helpers import explicit_wavelet_matrix, random_complex


class TestNormalize:
    def test_single_constant_coil(self):
        cs = normalize_sensitivities(np.full((1, 8, 8), 2.0 + 0j))
        assert np.allclose(cs.s, 1.0)

    def test_unit_sum_of_squares(self, rng):
        raw = random_complex(rng, (4, 16, 16))
        cs = normalize_sensitivities(raw)
        sos = np.sum(np.abs(cs.s) ** 2, axis=0)
        assert np.max(np.abs(sos - 1.0)) < 1e-10

    def test_idempotent(self, rng):
        cs = normalize_sensitivities(random_complex(rng, (3, 8, 8)))
        again = normalize_sensitivities(cs.s)
        assert np.max(np.abs(again.s - cs.s)) < 1e-12

    def test_zero_pixel_rejected(self):
        raw = np.ones((2, 8, 8), dtype=complex)
        raw[:, 3, 3] = 0.0
        with pytest.raises(ValidationError):
            normalize_sensitivities(raw)


class TestSimulate:
    def test_single_coil_is_phase_only(self):
        cs = simulate_sensitivities((16, 16), 1, seed=0)
        assert np.max(np.abs(np.abs(cs.s[0]) - 1.0)) < 1e-12

    def test_determinism(self):
        a = simulate_sensitivities((32, 32), 4, seed=9)
        b = simulate_sensitivities((32, 32), 4, seed=9)
        assert np.array_equal(a.s, b.s)
        c = simulate_sensitivities((32, 32), 4, seed=10)
        assert not np.array_equal(a.s, c.s)

    def test_adjacent_pixel_variation_bounded(self):
        # smooth maps: neighboring pixels (including the periodic wrap)
        # differ by a small amount; bound measured on defaults with margin
        cs = simulate_sensitivities((64, 64), 4, seed=3)
        for axis in (1, 2):
            step = np.abs(cs.s - np.roll(cs.s, 1, axis=axis))
            assert step.max() < 0.08

    def test_maps_vary_spatially(self):
        cs = simulate_sensitivities((32, 32), 4, seed=1)
        mags = np.abs(cs.s)
        assert mags.max() - mags.min() > 0.1


class TestXi:
    def test_flat_coils_give_conjugate_constants(self):
        gamma = np.array([0.6 + 0.8j, -0.8 + 0.6j]) / np.sqrt(2)
        maps = np.broadcast_to(gamma[:, None, None], (2, 16, 16)).copy()
        cs = CoilSet(s=maps)
        xi = compute_xi(cs, 2)
        for c in range(2):
            assert np.max(np.abs(xi.xi[c] - np.conj(gamma[c]))) < 1e-10

    def test_matches_explicit_matrix(self, rng):
        mat, smap = explicit_wavelet_matrix((8, 8), 1)
        cs = normalize_sensitivities(random_complex(rng, (2, 8, 8)))
        xi = compute_xi(cs, 1)
        for c in range(2):
            expected = (mat**2) @ np.conj(cs.s[c]).ravel()
            assert np.max(np.abs(xi.xi[c] - expected)) < 1e-10

    def test_energy_bound(self):
        # Jensen: sum_c |xi_cj|^2 <= 1 always; close to 1 for smooth coils
        cs = simulate_sensitivities((32, 32), 4, seed=5)
        xi = compute_xi(cs, 2)
        total = np.sum(np.abs(xi.xi) ** 2, axis=0)
        assert total.max() <= 1.0 + 1e-10
        assert total.min() >= 0.9


class TestPca:
    def test_full_rank_preserves_energy(self, rng):
        calib = random_complex(rng, (4, 6, 6))
        full = random_complex(rng, (4, 16, 16))
        out = pca_compress(calib, full, 4)
        assert abs(np.linalg.norm(out) - np.linalg.norm(full)) < 1e-10 * np.linalg.norm(full)

    def test_rank2_data_recoverable_from_two_virtual_coils(self, rng):
        mixing = random_complex(rng, (6, 2))
        sources = random_complex(rng, (2, 16, 16))
        full = np.einsum("cr,rhw->chw", mixing, sources)
        calib = full[:, 5:11, 5:11]
        basis, energy = coil_compression_basis(calib, 2)
        compressed = pca_compress(calib, full, 2)
        rebuilt = np.einsum("cv,vhw->chw", basis, compressed)
        assert np.max(np.abs(rebuilt - full)) < 1e-8
        assert energy[1] > 1.0 - 1e-12

    def test_retained_energy_monotone(self, rng):
        calib = random_complex(rng, (5, 8, 8))
        _, energy = coil_compression_basis(calib, 5)
        assert np.all(np.diff(energy) >= -1e-12)
        assert abs(energy[-1] - 1.0) < 1e-12

    def test_invalid_n_virtual(self, rng):
        calib = random_complex(rng, (3, 4, 4))
        with pytest.raises(ValidationError):
            coil_compression_basis(calib, 4)


class TestForwardAdjoint:
    def test_adjoint_identity(self, rng):
        cs = simulate_sensitivities((16, 16), 3, seed=2)
        dens = make_density((16, 16), 2.0, calib=(4, 4))
        mask = draw_mask(dens, seed=1)
        x = random_complex(rng, (16, 16))
        y = random_complex(rng, (3, 16, 16))
        lhs = np.vdot(y, forward(x, cs, mask))
        rhs = np.vdot(adjoint(np.where(mask.m, y, 0), cs), x)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_full_mask_flat_coil_is_fft(self, rng):
        cs = CoilSet(s=np.ones((1, 16, 16), dtype=complex))
        mask = np.ones((16, 16), dtype=bool)
        x = random_complex(rng, (16, 16))
        assert np.max(np.abs(forward(x, cs, mask)[0] - fft2c(x))) < 1e-12

    def test_adjoint_of_forward_full_mask_is_identity(self, rng):
        cs = simulate_sensitivities((16, 16), 4, seed=7)
        mask = np.ones((16, 16), dtype=bool)
        x = random_complex(rng, (16, 16))
        back = adjoint(forward(x, cs, mask), cs)
        assert np.max(np.abs(back - x)) <= 1e-10 * np.max(np.abs(x))

    def test_shape_mismatch_rejected(self, rng):
        cs = simulate_sensitivities((16, 16), 2, seed=0)
        with pytest.raises(ValidationError):
            forward(np.ones((8, 8), dtype=complex), cs, np.ones((16, 16), dtype=bool))
        with pytest.raises(ValidationError):
            adjoint(np.ones((2, 8, 8), dtype=complex), cs)
