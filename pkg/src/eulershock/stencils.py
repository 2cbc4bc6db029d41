"""
Finite-difference stencils on uniform periodic grids and on graded
(nonuniform) one-dimensional grids.
"""

import numpy as np


def fornberg_weights(z, nodes, m):
    """Weights for derivatives 0..m at point z from values at `nodes`.

    Returns an array of shape (m + 1, len(nodes)); row k approximates the
    k-th derivative.  Standard recursive construction (Fornberg 1988).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c.T


def centered_weights(order, accuracy=6):
    """Integer-offset centered weights for the `order`-th derivative (unit spacing)."""
    p = (order + 1) // 2 - 1 + accuracy // 2
    offsets = np.arange(-p, p + 1)
    return offsets, fornberg_weights(0.0, offsets, order)[order]


_PERIODIC_CACHE = {}


def periodic_derivative(f, h, order=1, accuracy=6):
    """Centered derivative of a periodic sample sequence along the last axis."""
    key = (order, accuracy)
    if key not in _PERIODIC_CACHE:
        _PERIODIC_CACHE[key] = centered_weights(order, accuracy)
    offsets, weights = _PERIODIC_CACHE[key]
    out = np.zeros_like(f, dtype=float)
    for o, wgt in zip(offsets, weights):
        if wgt != 0.0:
            out += wgt * np.roll(f, -o, axis=-1)
    return out / h ** order


def spectral_derivative(f, order=1):
    """Fourier derivative of samples on [-pi, pi) (used as an oracle)."""
    n = f.shape[-1]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if order % 2 == 1:
        k[n // 2] = 0.0
    fh = np.fft.fft(f)
    return np.real(np.fft.ifft((1j * k) ** order * fh))


class GradedStencil:
    """Precomputed nonuniform stencils for derivatives 1..4 on a sorted grid.

    Interior points use a centered window of `width` nodes; points near the
    ends use the nearest window inside the grid.  Beyond the grid the fields
    are treated as constant, so edge rows are only used by diagnostics.
    """

    def __init__(self, x, width=9, max_order=4):
        x = np.asarray(x, dtype=float)
        n = len(x)
        half = width // 2
        self.x = x
        self.max_order = max_order
        self.index = np.empty((n, width), dtype=np.intp)
        self.weights = np.empty((max_order + 1, n, width))
        for i in range(n):
            lo = min(max(i - half, 0), n - width)
            idx = np.arange(lo, lo + width)
            self.index[i] = idx
            self.weights[:, i, :] = fornberg_weights(x[i], x[idx], max_order)

    def apply(self, f, order):
        return np.einsum("ij,ij->i", self.weights[order], f[self.index])

    def row(self, i, order):
        return self.index[i], self.weights[order, i]
