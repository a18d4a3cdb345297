"""Shared test utilities: independent slow oracles built from definitions.

The wavelet oracle reimplements the transform directly from the filter taps
with plain Python loops (analysis row k gathers taps at (2k + t) mod L), so
matrix comparisons exercise the fast path against the definition rather than
against itself.
"""

import numpy as np

from pvdamp.wavelet import DEC_HI, DEC_LO, subband_map


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def centered_dft_matrix(h, w):
    n = h * w
    mat = np.zeros((n, n), dtype=complex)
    rows = np.arange(h)
    cols = np.arange(w)
    for wr in range(h):
        for wc in range(w):
            phase = np.add.outer(
                (wr - h // 2) * (rows - h // 2) / h,
                (wc - w // 2) * (cols - w // 2) / w,
            )
            mat[wr * w + wc] = np.exp(-2j * np.pi * phase).ravel()
    return mat / np.sqrt(n)


def _slow_analysis_1d(x, filt):
    length = len(x)
    taps = len(filt)
    out = np.zeros(length // 2, dtype=complex)
    for k in range(length // 2):
        acc = 0.0 + 0.0j
        for t in range(taps):
            acc += filt[t] * x[(2 * k + t) % length]
        out[k] = acc
    return out


def _slow_dwt2(img, levels):
    """Definition-level multi-level transform returning {(orient, scale): grid}."""
    grids = {}
    ll = np.asarray(img, dtype=complex)
    for scale in range(1, levels + 1):
        h, w = ll.shape
        lo1 = np.zeros((h, w // 2), dtype=complex)
        hi1 = np.zeros((h, w // 2), dtype=complex)
        for i in range(h):
            lo1[i] = _slow_analysis_1d(ll[i], DEC_LO)
            hi1[i] = _slow_analysis_1d(ll[i], DEC_HI)
        ll_new = np.zeros((h // 2, w // 2), dtype=complex)
        hl = np.zeros((h // 2, w // 2), dtype=complex)
        lh = np.zeros((h // 2, w // 2), dtype=complex)
        hh = np.zeros((h // 2, w // 2), dtype=complex)
        for j in range(w // 2):
            ll_new[:, j] = _slow_analysis_1d(lo1[:, j], DEC_LO)
            hl[:, j] = _slow_analysis_1d(lo1[:, j], DEC_HI)
            lh[:, j] = _slow_analysis_1d(hi1[:, j], DEC_LO)
            hh[:, j] = _slow_analysis_1d(hi1[:, j], DEC_HI)
        grids[("LH", scale)] = lh
        grids[("HL", scale)] = hl
        grids[("HH", scale)] = hh
        ll = ll_new
    grids[("LL", levels)] = ll
    return grids


def explicit_wavelet_matrix(shape, levels):
    """The (N, N) analysis matrix, assembled column by column from the
    definition-level transform."""
    h, w = shape
    smap = subband_map((h, w), levels)
    n = h * w
    mat = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        grids = _slow_dwt2(e.reshape(h, w), levels)
        col = np.empty(n, dtype=complex)
        for band in smap.bands:
            col[band.start : band.stop] = grids[(band.orientation, band.scale)].ravel()
        mat[:, i] = col.real
    return mat, smap
