"""NumPy reference implementation of the periodic filter-bank kernels."""

import numpy as np


def analysis_periodic(x, lo, hi):
    """Circular-correlate each row of ``x`` with both filters, decimate by 2.

    a[b, k] = sum_t lo[t] * x[b, (2k + t) % L], likewise d with ``hi``.
    """
    length = x.shape[1]
    half = length // 2
    taps = len(lo)
    idx = (2 * np.arange(half)[:, None] + np.arange(taps)[None, :]) % length
    gathered = x[:, idx]  # (batch, half, taps)
    return gathered @ lo, gathered @ hi


def synthesis_periodic(a, d, lo, hi):
    """Transpose (= inverse, by orthonormality) of :func:`analysis_periodic`."""
    batch, half = a.shape
    length = 2 * half
    taps = len(lo)
    base = 2 * np.arange(half)
    out = np.zeros((batch, length), dtype=np.complex128)
    for t in range(taps):
        # positions are distinct for fixed t, so fancy += accumulates safely
        out[:, (base + t) % length] += lo[t] * a + hi[t] * d
    return out
