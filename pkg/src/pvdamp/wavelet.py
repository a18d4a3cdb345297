"""Orthogonal 2-D Daubechies-4 wavelet transform with periodic boundaries.

Besides the forward/inverse transform this module provides the two spectral
companions the aliasing model needs:

* ``squared_filter_dwt2`` applies the entrywise-squared analysis matrix
  (out_j = sum_i |Psi_ji|^2 in_i), used to reduce coil maps to one complex
  constant per wavelet coefficient.
* ``subband_power_spectra`` returns, per subband, the k-space power spectrum
  shared by every atom in that subband (atoms within a band are circular
  translates of each other, so the spectrum is band-constant).

Coefficient layout is fixed: the coarsest LL block first, then per scale the
(LH, HL, HH) triples ordered fine-to-coarse (scale 1 = finest). Orientation
names the filter pair as (axis-0, axis-1), e.g. LH = lowpass down the rows,
highpass across the columns. All other modules address coefficients only
through :class:`SubbandMap`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .core import ValidationError, fft2c

__all__ = [
    "DEC_LO",
    "DEC_HI",
    "Band",
    "SubbandMap",
    "SubbandSpectra",
    "WaveletCoeffs",
    "subband_map",
    "dwt2",
    "idwt2",
    "squared_filter_dwt2",
    "subband_power_spectra",
    "band_atom",
]

# 8-tap orthonormal Daubechies filter (4 vanishing moments). Values polished
# by Newton iteration on the defining system so that double-shift
# orthonormality, sum = sqrt(2) and the moment conditions all hold to ~1e-15.
DEC_LO = np.array([
    0.23037781330889648,
    0.7148465705529156,
    0.6308807679298589,
    -0.02798376941685982,
    -0.18703481171909309,
    0.030841381835560754,
    0.0328830116668852,
    -0.010597401785069032,
])
DEC_HI = (DEC_LO[::-1] * np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0])).copy()

_ORIENTATIONS = ("LH", "HL", "HH")


@dataclass(frozen=True)
class Band:
    band_id: int
    orientation: str  # LL | LH | HL | HH
    scale: int  # 1 = finest detail scale; the LL band carries scale = levels
    start: int
    stop: int
    grid: tuple  # coefficient grid shape (h, w)

    @property
    def count(self):
        return self.stop - self.start


@dataclass(frozen=True)
class SubbandMap:
    """Index bookkeeping for the flat coefficient vector."""

    shape: tuple
    levels: int
    bands: tuple

    @property
    def n(self):
        return self.shape[0] * self.shape[1]

    @property
    def n_bands(self):
        return len(self.bands)

    @property
    def starts(self):
        return np.array([b.start for b in self.bands])

    @property
    def counts(self):
        return np.array([b.count for b in self.bands])

    def band_ids(self):
        """Per-coefficient band id, length N."""
        out = np.empty(self.n, dtype=np.intp)
        for b in self.bands:
            out[b.start : b.stop] = b.band_id
        return out

    def band_means(self, values):
        """Mean of a length-N vector over each band."""
        values = np.asarray(values)
        sums = np.add.reduceat(values, self.starts)
        return sums / self.counts

    def band_sums(self, values):
        return np.add.reduceat(np.asarray(values), self.starts)

    def broadcast(self, per_band):
        """Expand one value per band to a length-N vector."""
        per_band = np.asarray(per_band)
        return np.repeat(per_band, self.counts)

    def split(self, data):
        """View a flat vector as the list of per-band coefficient grids."""
        data = np.asarray(data)
        return [data[b.start : b.stop].reshape(b.grid) for b in self.bands]


@dataclass
class WaveletCoeffs:
    data: np.ndarray  # flat complex vector, length N, laid out per ``map``
    map: SubbandMap

    def with_data(self, data):
        return WaveletCoeffs(data=np.asarray(data), map=self.map)


@dataclass(frozen=True)
class SubbandSpectra:
    """Per-band k-space power maps P_b(w), shape (n_bands, H, W)."""

    power: np.ndarray
    map: SubbandMap


def _check_dyadic(shape, levels):
    h, w = shape
    if not 1 <= levels <= 6:
        raise ValidationError(f"levels must be in 1..6, got {levels}")
    if h % (1 << levels) or w % (1 << levels):
        raise ValidationError(
            f"shape {h}x{w} not divisible by 2^levels = {1 << levels}"
        )


@lru_cache(maxsize=64)
def subband_map(shape, levels):
    shape = tuple(int(s) for s in shape)
    _check_dyadic(shape, levels)
    h, w = shape
    bands = []
    cursor = 0

    def add(orientation, scale):
        nonlocal cursor
        grid = (h >> scale, w >> scale)
        count = grid[0] * grid[1]
        bands.append(
            Band(len(bands), orientation, scale, cursor, cursor + count, grid)
        )
        cursor += count

    add("LL", levels)
    for scale in range(1, levels + 1):
        for orientation in _ORIENTATIONS:
            add(orientation, scale)
    assert cursor == h * w
    return SubbandMap(shape=shape, levels=levels, bands=tuple(bands))


def _analyze_axis0(x):
    a, d = _kernels.analysis_periodic(np.ascontiguousarray(x.T), DEC_LO, DEC_HI)
    return a.T, d.T


def _synthesize_axis0(a, d):
    out = _kernels.synthesis_periodic(
        np.ascontiguousarray(a.T), np.ascontiguousarray(d.T), DEC_LO, DEC_HI
    )
    return out.T


def _dwt2_grids(img, levels):
    """One (H, W) image -> dict {(orientation, scale): grid}."""
    grids = {}
    ll = np.ascontiguousarray(img, dtype=np.complex128)
    for scale in range(1, levels + 1):
        lo1, hi1 = _kernels.analysis_periodic(ll, DEC_LO, DEC_HI)  # along axis 1
        ll_, hl = _analyze_axis0(lo1)
        lh, hh = _analyze_axis0(hi1)
        grids[("LH", scale)] = lh
        grids[("HL", scale)] = hl
        grids[("HH", scale)] = hh
        ll = np.ascontiguousarray(ll_)
    grids[("LL", levels)] = ll
    return grids


def _idwt2_grids(grids, levels):
    ll = grids[("LL", levels)]
    for scale in range(levels, 0, -1):
        lo1 = _synthesize_axis0(ll, grids[("HL", scale)])
        hi1 = _synthesize_axis0(grids[("LH", scale)], grids[("HH", scale)])
        ll = _kernels.synthesis_periodic(
            np.ascontiguousarray(lo1), np.ascontiguousarray(hi1), DEC_LO, DEC_HI
        )
    return ll


def dwt2(img, levels):
    """Orthonormal multi-level analysis of a (H, W) complex image."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValidationError(f"dwt2 expects a 2-D image, got shape {img.shape}")
    smap = subband_map(img.shape, levels)
    grids = _dwt2_grids(img, levels)
    data = np.empty(smap.n, dtype=np.complex128)
    for band in smap.bands:
        data[band.start : band.stop] = grids[(band.orientation, band.scale)].ravel()
    return WaveletCoeffs(data=data, map=smap)


def idwt2(coeffs):
    """Inverse (= adjoint) of :func:`dwt2`."""
    smap = coeffs.map
    data = np.asarray(coeffs.data)
    if data.shape != (smap.n,):
        raise ValidationError(
            f"coefficient vector has length {data.shape}, expected ({smap.n},)"
        )
    grids = {
        (b.orientation, b.scale): data[b.start : b.stop].reshape(b.grid)
        for b in smap.bands
    }
    return _idwt2_grids(grids, smap.levels)


@lru_cache(maxsize=64)
def _band_atoms(shape, levels):
    """Representative analysis atom per band (the band's (0, 0) basis image).

    Every analysis row in band b is this atom circularly translated by the
    band's decimation stride, which is what makes the band-constant spectra
    and the strided-correlation squared transform exact.
    """
    smap = subband_map(shape, levels)
    atoms = []
    for band in smap.bands:
        data = np.zeros(smap.n, dtype=np.complex128)
        data[band.start] = 1.0
        atom = idwt2(WaveletCoeffs(data=data, map=smap)).real
        atom.setflags(write=False)
        atoms.append(atom)
    return tuple(atoms)


def band_atom(shape, levels, band_id):
    return _band_atoms(tuple(shape), levels)[band_id]


def squared_filter_dwt2(img, levels):
    """Apply the entrywise-squared analysis matrix: out_j = sum_i |Psi_ji|^2 x_i.

    Computed exactly per band as a circular correlation with the squared
    band atom, sampled on the band's decimation lattice. (Rerunning the
    filter bank with squared taps is exact only for a single level: composed
    filter taps overlap, and squaring does not commute with the overlap sums.)
    """
    img = np.asarray(img)
    smap = subband_map(img.shape, levels)
    atoms = _band_atoms(smap.shape, levels)
    spectrum = np.fft.fft2(img)
    out = np.empty(smap.n, dtype=np.complex128)
    for band, atom in zip(smap.bands, atoms):
        corr = np.fft.ifft2(spectrum * np.conj(np.fft.fft2(atom**2)))
        stride = 1 << band.scale
        out[band.start : band.stop] = corr[::stride, ::stride].ravel()
    if not np.iscomplexobj(img):
        out = out.real.astype(np.complex128)
    return WaveletCoeffs(data=out, map=smap)


@lru_cache(maxsize=64)
def _spectra_cached(shape, levels):
    smap = subband_map(shape, levels)
    atoms = _band_atoms(shape, levels)
    power = np.empty((smap.n_bands,) + shape, dtype=np.float64)
    for band, atom in zip(smap.bands, atoms):
        power[band.band_id] = np.abs(fft2c(atom)) ** 2
    power.setflags(write=False)
    return SubbandSpectra(power=power, map=smap)


def subband_power_spectra(shape, levels):
    """Band-constant |Psi_hat|^2 maps in centered k-space coordinates.

    Each map is nonnegative and sums to 1 (unit-norm atom under the unitary
    transform); together they satisfy sum_b N_b P_b(w) = 1 at every w.
    """
    return _spectra_cached(tuple(int(s) for s in shape), levels)
